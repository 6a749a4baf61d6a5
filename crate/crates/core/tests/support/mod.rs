//! Test-only references: a brute-force spotting mAP and random instance
//! generators. Shared with the command-line acceptance harness.
#![allow(dead_code)]

use actionspotter::dataset::{AnnotationSet, GroundTruthSegment, SpotPrediction, VideoAnnotation};
use rand::Rng;

/// Spotting mAP recomputed from first principles.
///
/// Every ranked prefix is matched again from scratch, and the AP sums each
/// recall increment times the best precision of any prefix reaching at
/// least that recall. Nothing is shared with the library implementation.
pub fn brute_force_map(preds: &[SpotPrediction], gts: &AnnotationSet) -> f64 {
    let mut aps = Vec::new();
    for class in 0..gts.num_classes {
        let segments: Vec<(&str, GroundTruthSegment)> = gts
            .videos
            .iter()
            .flat_map(|v| v.segments.iter().filter(|s| s.label == class).map(move |s| (v.id.as_str(), *s)))
            .collect();
        if segments.is_empty() {
            continue;
        }
        let mut ranked: Vec<&SpotPrediction> = preds.iter().filter(|p| p.label == class).collect();
        ranked.sort_by(|a, b| {
            if a.score != b.score {
                return if a.score > b.score { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater };
            }
            (a.video.as_str(), a.t).cmp(&(b.video.as_str(), b.t))
        });
        let n = ranked.len();
        let mut precision = vec![0.0; n];
        let mut recall = vec![0.0; n];
        for k in 1..=n {
            let mut used = vec![false; segments.len()];
            let mut tp = 0usize;
            for spot in &ranked[..k] {
                let pick = (0..segments.len())
                    .filter(|&i| !used[i] && segments[i].0 == spot.video && segments[i].1.contains(spot.t))
                    .min_by_key(|&i| (segments[i].1.start, segments[i].1.end));
                if let Some(i) = pick {
                    used[i] = true;
                    tp += 1;
                }
            }
            precision[k - 1] = tp as f64 / k as f64;
            recall[k - 1] = tp as f64 / segments.len() as f64;
        }
        let mut levels: Vec<f64> = recall.iter().copied().filter(|&r| r > 0.0).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut ap = 0.0;
        let mut prev = 0.0;
        for r in levels {
            let best = (0..n).filter(|&k| recall[k] >= r).map(|k| precision[k]).fold(0.0, f64::max);
            ap += (r - prev) * best;
            prev = r;
        }
        aps.push(ap);
    }
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Ground truth with up to `max_videos` videos of `frames` frames and up to
/// `max_classes` classes; segments may overlap.
pub fn random_annotations(rng: &mut impl Rng, max_videos: usize, max_classes: usize, frames: usize) -> AnnotationSet {
    let num_classes = rng.random_range(1..=max_classes);
    let videos = (0..rng.random_range(1..=max_videos))
        .map(|v| {
            let segments = (0..rng.random_range(0..=4))
                .map(|_| {
                    let start = rng.random_range(0..frames);
                    let end = rng.random_range(start..(start + 6).min(frames));
                    GroundTruthSegment {
                        label: rng.random_range(0..num_classes),
                        start,
                        end,
                    }
                })
                .collect();
            VideoAnnotation {
                id: format!("v{v}"),
                num_frames: frames,
                segments,
            }
        })
        .collect();
    AnnotationSet::new(num_classes, videos).expect("generated annotations are valid")
}

/// Up to `max_spots` spots on the videos of `gts`. Scores come from a small
/// grid so ties are frequent.
pub fn random_spots(rng: &mut impl Rng, gts: &AnnotationSet, max_spots: usize) -> Vec<SpotPrediction> {
    (0..rng.random_range(0..=max_spots))
        .map(|_| {
            let v = &gts.videos[rng.random_range(0..gts.videos.len())];
            SpotPrediction {
                video: v.id.clone(),
                t: rng.random_range(0..v.num_frames),
                score: rng.random_range(0..5) as f64 / 4.0,
                label: rng.random_range(0..gts.num_classes),
            }
        })
        .collect()
}

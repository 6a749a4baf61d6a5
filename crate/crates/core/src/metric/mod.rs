//! Spotting mean average precision.
//!
//! For every class, spots are ranked by score (ties broken by video id,
//! then timestamp, both ascending) and matched greedily in rank order: a
//! spot is a true positive iff its timestamp falls inside a not yet matched
//! ground-truth segment of the same class in the same video. That segment
//! is then consumed; if several unmatched segments contain the timestamp,
//! the earliest-starting one is. Everything else is a false positive.
//!
//! Average precision is the area under the all-point interpolated
//! precision envelope, and the mean is taken over classes that have at
//! least one ground-truth segment.

mod accumulator;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use accumulator::MapAccumulator;

use crate::dataset::{AnnotationSet, GroundTruthSegment, SpotPrediction};
use crate::error::{Error, Result};

pub const INTERPOLATION: &str = "all-point";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Match {
    TruePositive,
    FalsePositive,
}

/// Match outcome of each ranked spot of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchFlags {
    pub flags: Vec<Match>,
    pub num_gt: usize,
}

impl MatchFlags {
    pub fn true_positives(&self) -> usize {
        self.flags.iter().filter(|&&m| m == Match::TruePositive).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
}

/// One point per ranked spot.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

/// Ranking order: score descending, then video id and timestamp ascending.
pub fn rank_order(a: &SpotPrediction, b: &SpotPrediction) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.video.cmp(&b.video))
        .then_with(|| a.t.cmp(&b.t))
}

/// Greedy first-match over ranked spots.
///
/// `segments` pairs each segment with the id of the video it belongs to.
/// Spots must already be in [`rank_order`] and spots and segments must
/// share one class.
pub fn match_spots(
    spots: &[SpotPrediction],
    segments: &[(String, GroundTruthSegment)],
) -> Result<MatchFlags> {
    if spots
        .windows(2)
        .any(|w| rank_order(&w[0], &w[1]) == Ordering::Greater)
    {
        return Err(Error::Contract("spots are not in rank order".into()));
    }
    let class = spots
        .first()
        .map(|s| s.label)
        .or_else(|| segments.first().map(|(_, s)| s.label));
    if spots.iter().any(|s| Some(s.label) != class)
        || segments.iter().any(|(_, s)| Some(s.label) != class)
    {
        return Err(Error::Contract("spots and segments span several classes".into()));
    }
    let mut by_video: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
    for (video, s) in segments {
        by_video.entry(video.as_str()).or_default().push((s.start, s.end));
    }
    let mut pools: Vec<SegmentPool> = Vec::new();
    let mut pool_of: HashMap<&str, usize> = HashMap::new();
    for (video, segs) in by_video {
        pool_of.insert(video, pools.len());
        pools.push(SegmentPool::new(segs));
    }
    let flags = spots
        .iter()
        .map(|s| match pool_of.get(s.video.as_str()) {
            Some(&i) if pools[i].take(s.t) => Match::TruePositive,
            _ => Match::FalsePositive,
        })
        .collect();
    Ok(MatchFlags {
        flags,
        num_gt: segments.len(),
    })
}

/// Segments of one (video, class) pair with their matched state.
#[derive(Debug, Clone)]
pub(crate) struct SegmentPool {
    segments: Vec<(usize, usize)>,
    matched: Vec<bool>,
}

impl SegmentPool {
    pub(crate) fn new(mut segments: Vec<(usize, usize)>) -> Self {
        segments.sort_unstable();
        let matched = vec![false; segments.len()];
        Self { segments, matched }
    }

    pub(crate) fn reset(&mut self) {
        self.matched.iter_mut().for_each(|m| *m = false);
    }

    /// Consumes the earliest unmatched segment containing `t`.
    pub(crate) fn take(&mut self, t: usize) -> bool {
        for (i, &(start, end)) in self.segments.iter().enumerate() {
            if start > t {
                break;
            }
            if !self.matched[i] && t <= end {
                self.matched[i] = true;
                return true;
            }
        }
        false
    }
}

/// Precision and recall after each ranked spot. Requires `num_gt >= 1`.
pub fn pr_curve(flags: &MatchFlags) -> PrCurve {
    let num_gt = flags.num_gt.max(1) as f64;
    let mut tp = 0usize;
    let points = flags
        .flags
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if *m == Match::TruePositive {
                tp += 1;
            }
            PrPoint {
                precision: tp as f64 / (i + 1) as f64,
                recall: tp as f64 / num_gt,
            }
        })
        .collect();
    PrCurve { points }
}

/// Area under the precision envelope: each recall increment is weighted by
/// the best precision reached at that recall or beyond.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let pts = &curve.points;
    let mut envelope = vec![0.0; pts.len()];
    let mut best = 0.0f64;
    for i in (0..pts.len()).rev() {
        best = best.max(pts[i].precision);
        envelope[i] = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in pts.iter().zip(&envelope) {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * env;
            prev_recall = p.recall;
        }
    }
    ap
}

pub(crate) fn ap_of_flags(flags: &MatchFlags) -> f64 {
    average_precision(&pr_curve(flags))
}

/// Unweighted mean; zero when no class is evaluated.
pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: usize,
    pub ap: f64,
    pub num_gt: usize,
    pub num_spots: usize,
}

/// The evaluator's JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map: f64,
    pub per_class: Vec<ClassReport>,
    pub interpolation: String,
}

/// Checks that every prediction names a known video, a frame inside it,
/// and a known class.
pub fn validate_predictions(preds: &[SpotPrediction], gts: &AnnotationSet) -> Result<()> {
    let frames: HashMap<&str, usize> = gts
        .videos
        .iter()
        .map(|v| (v.id.as_str(), v.num_frames))
        .collect();
    for (i, p) in preds.iter().enumerate() {
        let Some(&n) = frames.get(p.video.as_str()) else {
            return Err(Error::UnknownVideo(p.video.clone()));
        };
        if p.t >= n {
            return Err(Error::Prediction {
                line: i + 1,
                reason: format!("frame {} outside video {:?} of {n} frames", p.t, p.video),
            });
        }
        if p.label >= gts.num_classes {
            return Err(Error::Prediction {
                line: i + 1,
                reason: format!("class {} not below {}", p.label, gts.num_classes),
            });
        }
        if !p.score.is_finite() {
            return Err(Error::Prediction {
                line: i + 1,
                reason: "score is not finite".into(),
            });
        }
    }
    Ok(())
}

/// Full per-class evaluation with spots pooled across videos.
pub fn evaluate_spots(preds: &[SpotPrediction], gts: &AnnotationSet) -> Result<MapReport> {
    validate_predictions(preds, gts)?;
    let mut per_class = Vec::new();
    for class in 0..gts.num_classes {
        let segments: Vec<(String, GroundTruthSegment)> = gts
            .videos
            .iter()
            .flat_map(|v| {
                v.segments
                    .iter()
                    .filter(|s| s.label == class)
                    .map(|s| (v.id.clone(), *s))
            })
            .collect();
        if segments.is_empty() {
            continue;
        }
        let mut spots: Vec<SpotPrediction> =
            preds.iter().filter(|p| p.label == class).cloned().collect();
        spots.sort_by(rank_order);
        let flags = match_spots(&spots, &segments)?;
        per_class.push(ClassReport {
            label: class,
            ap: ap_of_flags(&flags),
            num_gt: segments.len(),
            num_spots: spots.len(),
        });
    }
    Ok(MapReport {
        map: mean(per_class.iter().map(|c| c.ap)),
        per_class,
        interpolation: INTERPOLATION.to_string(),
    })
}

pub fn spotting_map(preds: &[SpotPrediction], gts: &AnnotationSet) -> Result<f64> {
    evaluate_spots(preds, gts).map(|r| r.map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VideoAnnotation;
    use Match::{FalsePositive as FP, TruePositive as TP};

    fn spot(video: &str, t: usize, score: f64, label: usize) -> SpotPrediction {
        SpotPrediction {
            video: video.into(),
            t,
            score,
            label,
        }
    }

    fn segs(list: &[(usize, usize)]) -> Vec<(String, GroundTruthSegment)> {
        list.iter()
            .map(|&(start, end)| ("v".to_string(), GroundTruthSegment { label: 0, start, end }))
            .collect()
    }

    #[test]
    fn single_perfect_spot() {
        let f = match_spots(&[spot("v", 15, 0.9, 0)], &segs(&[(10, 20)])).unwrap();
        assert_eq!(f.flags, vec![TP]);
        assert_eq!(f.num_gt, 1);
    }

    #[test]
    fn second_spot_on_same_segment_is_false_alarm() {
        let spots = [spot("v", 15, 0.9, 0), spot("v", 16, 0.8, 0)];
        let f = match_spots(&spots, &segs(&[(10, 20)])).unwrap();
        assert_eq!(f.flags, vec![TP, FP]);
    }

    #[test]
    fn greedy_over_two_segments() {
        let spots = [spot("v", 15, 0.9, 0), spot("v", 16, 0.8, 0), spot("v", 35, 0.7, 0)];
        let f = match_spots(&spots, &segs(&[(10, 20), (30, 40)])).unwrap();
        assert_eq!(f.flags, vec![TP, FP, TP]);
    }

    #[test]
    fn nested_segments_consume_earliest_start() {
        // Spot at 12 could match either; the earlier-starting one is used, so
        // the second spot at 12 still finds the later one.
        let spots = [spot("v", 12, 0.9, 0), spot("v", 12, 0.8, 0), spot("v", 12, 0.7, 0)];
        let f = match_spots(&spots, &segs(&[(11, 13), (5, 20)])).unwrap();
        assert_eq!(f.flags, vec![TP, TP, FP]);
    }

    #[test]
    fn matching_is_per_video() {
        let spots = [spot("w", 15, 0.9, 0)];
        let f = match_spots(&spots, &segs(&[(10, 20)])).unwrap();
        assert_eq!(f.flags, vec![FP]);
    }

    #[test]
    fn unsorted_input_is_contract_violation() {
        let spots = [spot("v", 15, 0.5, 0), spot("v", 16, 0.8, 0)];
        assert!(matches!(
            match_spots(&spots, &segs(&[(10, 20)])),
            Err(Error::Contract(_))
        ));
        let mixed = [spot("v", 15, 0.9, 0), spot("v", 16, 0.8, 1)];
        assert!(matches!(
            match_spots(&mixed, &segs(&[(10, 20)])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn pr_points() {
        let c = pr_curve(&MatchFlags { flags: vec![TP], num_gt: 1 });
        assert_eq!(c.points, vec![PrPoint { precision: 1.0, recall: 1.0 }]);

        let c = pr_curve(&MatchFlags { flags: vec![TP, FP, TP], num_gt: 2 });
        let expect = [(1.0, 0.5), (0.5, 0.5), (2.0 / 3.0, 1.0)];
        for (p, (prec, rec)) in c.points.iter().zip(expect) {
            assert!((p.precision - prec).abs() < 1e-15);
            assert!((p.recall - rec).abs() < 1e-15);
        }

        let c = pr_curve(&MatchFlags { flags: vec![FP], num_gt: 3 });
        assert_eq!(c.points, vec![PrPoint { precision: 0.0, recall: 0.0 }]);
    }

    #[test]
    fn ap_values() {
        let ap = |flags: Vec<Match>, num_gt| average_precision(&pr_curve(&MatchFlags { flags, num_gt }));
        assert_eq!(ap(vec![TP], 1), 1.0);
        assert!((ap(vec![TP, FP, TP], 2) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(ap(vec![FP, FP, FP], 2), 0.0);
        assert_eq!(ap(vec![], 2), 0.0);
        // Trailing false alarms do not change the envelope.
        assert_eq!(ap(vec![TP, TP, FP, FP], 2), 1.0);
        // Missing recall caps the area.
        assert!((ap(vec![TP], 4) - 0.25).abs() < 1e-15);
    }

    fn annotations() -> AnnotationSet {
        AnnotationSet::new(
            3,
            vec![
                VideoAnnotation {
                    id: "a".into(),
                    num_frames: 50,
                    segments: vec![
                        GroundTruthSegment { label: 0, start: 10, end: 20 },
                        GroundTruthSegment { label: 0, start: 30, end: 40 },
                    ],
                },
                VideoAnnotation {
                    id: "b".into(),
                    num_frames: 50,
                    segments: vec![GroundTruthSegment { label: 1, start: 0, end: 4 }],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn map_cases() {
        let gts = annotations();
        assert_eq!(spotting_map(&[], &gts).unwrap(), 0.0);

        let perfect = [spot("a", 15, 0.3, 0), spot("a", 31, 0.2, 0), spot("b", 4, 0.9, 1)];
        assert_eq!(spotting_map(&perfect, &gts).unwrap(), 1.0);

        // Class 2 has no ground truth and is excluded from the mean even when
        // it has spots.
        let mut extra = perfect.to_vec();
        extra.push(spot("b", 10, 0.99, 2));
        let report = evaluate_spots(&extra, &gts).unwrap();
        assert_eq!(report.map, 1.0);
        assert_eq!(report.per_class.len(), 2);
        assert_eq!(report.interpolation, "all-point");

        // The 5/6 fixture: TP, FP, TP on class 0; class 1 perfect.
        let fixture = [
            spot("a", 15, 0.9, 0),
            spot("a", 16, 0.8, 0),
            spot("a", 35, 0.7, 0),
            spot("b", 2, 0.5, 1),
        ];
        let r = evaluate_spots(&fixture, &gts).unwrap();
        assert!((r.per_class[0].ap - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.per_class[0].num_spots, 3);
        assert!((r.map - (5.0 / 6.0 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_video_is_cross_reference_error() {
        let gts = annotations();
        assert!(matches!(
            spotting_map(&[spot("zzz", 1, 0.5, 0)], &gts),
            Err(Error::UnknownVideo(v)) if v == "zzz"
        ));
        assert!(spotting_map(&[spot("a", 50, 0.5, 0)], &gts).is_err());
        assert!(spotting_map(&[spot("a", 5, 0.5, 3)], &gts).is_err());
    }
}

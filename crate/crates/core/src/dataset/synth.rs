//! Synthetic feature sequences with planted action segments.
//!
//! Every frame is a prototype vector plus isotropic gaussian noise: the
//! background prototype outside segments, the class prototype inside them.
//! Prototypes are scaled orthonormal vectors, so every pair sits exactly
//! `separation` apart.
//!
//! With `cue_frames` set, all segments share one "action" prototype and
//! the class is only visible on the single frame right before the segment,
//! which carries a class-specific cue prototype. Labelling such segments
//! requires remembering the cue.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureSequence, GroundTruthSegment, Video, VideoAnnotation};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub train_videos: usize,
    pub val_videos: usize,
    pub frames: usize,
    pub segments_min: usize,
    pub segments_max: usize,
    pub min_segment_len: usize,
    pub max_segment_len: usize,
    /// Minimum number of background frames between consecutive segments.
    pub min_gap: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub noise_scale: f64,
    pub cue_frames: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            train_videos: 200,
            val_videos: 50,
            frames: 120,
            segments_min: 1,
            segments_max: 4,
            min_segment_len: 1,
            max_segment_len: 24,
            min_gap: 2,
            feature_dim: 16,
            separation: 4.0,
            noise_scale: 0.6,
            cue_frames: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn num_prototypes(&self) -> usize {
        if self.cue_frames {
            2 + self.num_classes
        } else {
            1 + self.num_classes
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_classes == 0 {
            return fail("num_classes must be positive");
        }
        if self.frames == 0 {
            return fail("frames must be positive");
        }
        if self.segments_min > self.segments_max {
            return fail("segments_min exceeds segments_max");
        }
        if self.min_segment_len == 0 || self.min_segment_len > self.max_segment_len {
            return fail("segment length range must satisfy 1 <= min <= max");
        }
        if self.feature_dim < self.num_prototypes() {
            return Err(Error::Config(format!(
                "feature_dim {} cannot hold {} orthogonal prototypes",
                self.feature_dim,
                self.num_prototypes()
            )));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return fail("separation must be finite and non-negative");
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return fail("noise_scale must be finite and non-negative");
        }
        // Worst case must still leave background frames.
        let k = self.segments_max;
        let lead = usize::from(self.cue_frames && k > 0);
        let gaps = if self.cue_frames {
            k.saturating_sub(1) * self.min_gap.max(1)
        } else {
            k.saturating_sub(1) * self.min_gap
        };
        if k * self.max_segment_len + gaps + lead >= self.frames {
            return Err(Error::Config(format!(
                "{k} segments of up to {} frames do not fit in {} frames with background",
                self.max_segment_len, self.frames
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Dataset,
    pub val: Dataset,
    pub background: Vec<f64>,
    /// Prototype rendered inside segments of each class.
    pub class_prototypes: Vec<Vec<f64>>,
    /// Cue prototypes, one per class; empty unless `cue_frames` is set.
    pub cue_prototypes: Vec<Vec<f64>>,
}

fn orthonormal_basis(count: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut proto_rng = seed::rng(cfg.seed, &[0]);
    let scale = cfg.separation / std::f64::consts::SQRT_2;
    let mut protos: Vec<Vec<f64>> = orthonormal_basis(cfg.num_prototypes(), cfg.feature_dim, &mut proto_rng)
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * scale).collect())
        .collect();
    let background = protos.remove(0);
    let (class_prototypes, cue_prototypes) = if cfg.cue_frames {
        let action = protos.remove(0);
        (vec![action; cfg.num_classes], protos)
    } else {
        (protos, Vec::new())
    };

    let render = |split: u64, count: usize, prefix: &str| -> Result<Dataset> {
        let videos = (0..count)
            .map(|i| {
                let mut rng = seed::rng(cfg.seed, &[1, split, i as u64]);
                let segments = place_segments(cfg, &mut rng);
                let mut data = Vec::with_capacity(cfg.frames * cfg.feature_dim);
                let mut owner: Vec<Option<&[f64]>> = vec![None; cfg.frames];
                for s in &segments {
                    for o in &mut owner[s.start..=s.end] {
                        *o = Some(&class_prototypes[s.label]);
                    }
                    if cfg.cue_frames {
                        owner[s.start - 1] = Some(&cue_prototypes[s.label]);
                    }
                }
                for o in owner {
                    let proto = o.unwrap_or(&background);
                    for &p in proto {
                        let n: f64 = rng.sample(StandardNormal);
                        data.push(p + cfg.noise_scale * n);
                    }
                }
                let id = format!("{prefix}_{i:04}");
                Ok(Video {
                    features: FeatureSequence::new(id.clone(), cfg.feature_dim, 1, data)?,
                    annotation: VideoAnnotation {
                        id,
                        num_frames: cfg.frames,
                        segments,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            num_classes: cfg.num_classes,
            videos,
        })
    };

    Ok(SynthDataset {
        train: render(0, cfg.train_videos, "train")?,
        val: render(1, cfg.val_videos, "val")?,
        background,
        class_prototypes,
        cue_prototypes,
    })
}

/// Draws segment count, lengths and classes, then spreads the spare
/// background frames uniformly over the gaps (stars and bars).
fn place_segments(cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<GroundTruthSegment> {
    let k = rng.random_range(cfg.segments_min..=cfg.segments_max);
    let lens: Vec<usize> = (0..k)
        .map(|_| rng.random_range(cfg.min_segment_len..=cfg.max_segment_len))
        .collect();
    let labels: Vec<usize> = (0..k).map(|_| rng.random_range(0..cfg.num_classes)).collect();
    let gap = if cfg.cue_frames { cfg.min_gap.max(1) } else { cfg.min_gap };
    let lead = usize::from(cfg.cue_frames);
    let used: usize = lens.iter().sum::<usize>() + k.saturating_sub(1) * gap + lead;
    let spare = cfg.frames - used;
    let mut cuts: Vec<usize> = (0..k).map(|_| rng.random_range(0..=spare)).collect();
    cuts.sort_unstable();

    let mut segments = Vec::with_capacity(k);
    let mut cursor = lead;
    let mut prev_cut = 0;
    for i in 0..k {
        cursor += cuts[i] - prev_cut;
        prev_cut = cuts[i];
        if i > 0 {
            cursor += gap;
        }
        segments.push(GroundTruthSegment {
            label: labels[i],
            start: cursor,
            end: cursor + lens[i] - 1,
        });
        cursor += lens[i];
    }
    segments
}

//! Per-frame segmentation baselines: a two-layer trunk on each feature row
//! with no memory and no browsing.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::center_targets;
use crate::dataset::{Dataset, FrameLabel, PredictionSet, SpotPrediction, Video};
use crate::error::{Error, Result};
use crate::metric::spotting_map;
use crate::nn::{adam_step, glorot, linalg, Categorical, LayoutBuilder, Mlp, MlpCache, OptState};
use crate::seed;
use crate::trainer::HyperParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameModelKind {
    /// One `C + 1`-way classifier whose positives are segment centers only.
    /// Every row with a non-background argmax becomes a spot.
    Naive,
    /// A centerness head and a frame-class head on a shared trunk. Every
    /// row becomes a spot scored by its centerness.
    Multitask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameModel {
    pub kind: FrameModelKind,
    pub num_classes: usize,
    trunk: Mlp,
    class_head: Mlp,
    center_head: Option<Mlp>,
    pub data: Vec<f64>,
}

struct FrameCache {
    trunk: MlpCache,
    class: MlpCache,
    center: Option<MlpCache>,
}

/// Training summary of a segmentation baseline.
#[derive(Debug, Clone)]
pub struct SegmentationOutcome {
    pub model: FrameModel,
    /// `(epoch, mean training loss, validation mAP)` per epoch.
    pub history: Vec<(usize, f64, f64)>,
    pub val_map: f64,
    pub val_predictions: PredictionSet,
}

impl FrameModel {
    pub fn new(kind: FrameModelKind, input_dim: usize, hidden: usize, num_classes: usize, seed_value: u64) -> Self {
        let mut b = LayoutBuilder::default();
        let trunk = Mlp::new(&mut b, &[input_dim, hidden, hidden], true);
        let class_head = Mlp::new(&mut b, &[hidden, num_classes + 1], false);
        let center_head = (kind == FrameModelKind::Multitask).then(|| Mlp::new(&mut b, &[hidden, 2], false));
        let mut data = vec![0.0; b.len()];
        let mut rng = seed::rng(seed_value, &[0x5e9]);
        for mlp in std::iter::once(&trunk).chain([&class_head]).chain(center_head.as_ref()) {
            for l in &mlp.layers {
                glorot(&l.w, 1.0, &mut data, &mut rng);
            }
        }
        Self {
            kind,
            num_classes,
            trunk,
            class_head,
            center_head,
            data,
        }
    }

    fn forward(&self, x: &[f64]) -> FrameCache {
        let trunk = self.trunk.forward(&self.data, x);
        let class = self.class_head.forward(&self.data, trunk.output());
        let center = self.center_head.as_ref().map(|h| h.forward(&self.data, trunk.output()));
        FrameCache { trunk, class, center }
    }

    /// Class probabilities (background last) and, for the multi-task
    /// model, the probability that the row is a segment center.
    pub fn frame_probs(&self, x: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
        let c = self.forward(x);
        let class = Categorical::new(c.class.output())?.probs;
        let center = match &c.center {
            Some(m) => Some(Categorical::new(m.output())?.probs[1]),
            None => None,
        };
        Ok((class, center))
    }

    pub fn predict_video(&self, video: &Video) -> Result<PredictionSet> {
        let mut out = Vec::new();
        for row in 0..video.features.frames() {
            let (class, center) = self.frame_probs(video.features.row(row))?;
            let t = video.frame_of_row(row);
            let spot = |label: usize, score: f64| SpotPrediction {
                video: video.id().to_string(),
                t,
                score,
                label,
            };
            match self.kind {
                FrameModelKind::Naive => {
                    let best = linalg::argmax(&class);
                    if best < self.num_classes {
                        out.push(spot(best, class[best]));
                    }
                }
                FrameModelKind::Multitask => {
                    let label = linalg::argmax(&class[..self.num_classes]);
                    out.push(spot(label, center.unwrap_or(0.0)));
                }
            }
        }
        Ok(out)
    }

    pub fn predict(&self, data: &Dataset) -> Result<PredictionSet> {
        let mut out = Vec::new();
        for v in &data.videos {
            out.extend(self.predict_video(v)?);
        }
        Ok(out)
    }

    /// Mean per-row cross-entropy of one video; adds `scale` times its
    /// gradient into `grad`.
    fn video_loss(&self, video: &Video, grad: &mut [f64], scale: f64) -> Result<f64> {
        let rows = video.features.frames();
        let centers = center_targets(&video.annotation);
        let n = rows as f64;
        let mut total = 0.0;
        for row in 0..rows {
            let frame = video.frame_of_row(row);
            let x = video.features.row(row);
            let cache = self.forward(x);
            let span = video.features.chunk_span();
            // A chunk counts as a center when any of its frames is one.
            let center = (row * span..((row + 1) * span).min(centers.len()))
                .find_map(|f| match centers[f] {
                    FrameLabel::Action(c) => Some(c),
                    FrameLabel::Background => None,
                });
            let class_target = match self.kind {
                FrameModelKind::Naive => center.unwrap_or(self.num_classes),
                FrameModelKind::Multitask => video.annotation.frame_label(frame)?.class_index(self.num_classes),
            };
            let dist = Categorical::new(cache.class.output())?;
            total -= dist.log_probs[class_target];
            let d_class: Vec<f64> = dist.d_cross_entropy(class_target).iter().map(|g| g * scale / n).collect();
            let mut d_trunk = self
                .class_head
                .backward(&self.data, grad, cache.trunk.output(), &cache.class, &d_class);
            if let (Some(head), Some(c)) = (&self.center_head, &cache.center) {
                let dist = Categorical::new(c.output())?;
                let y = usize::from(center.is_some());
                total -= dist.log_probs[y];
                let d: Vec<f64> = dist.d_cross_entropy(y).iter().map(|g| g * scale / n).collect();
                let extra = head.backward(&self.data, grad, cache.trunk.output(), c, &d);
                linalg::axpy(1.0, &extra, &mut d_trunk);
            }
            self.trunk.backward(&self.data, grad, x, &cache.trunk, &d_trunk);
        }
        Ok(total / n)
    }

    /// Trains with Adam on batches of whole videos, keeping the parameters
    /// with the best validation mAP. Uses the epoch budget, batch size,
    /// learning rate, hidden width, patience and seed of `hp`.
    pub fn train(kind: FrameModelKind, train: &Dataset, val: &Dataset, hp: &HyperParams) -> Result<SegmentationOutcome> {
        hp.validate()?;
        if train.videos.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        let mut model = Self::new(kind, train.feature_dim(), hp.hidden, train.num_classes, hp.seed);
        let mut opt = OptState::new(model.data.len(), hp.lr);
        let annotations = val.annotations();
        let mut best_preds = model.predict(val)?;
        let mut best = (model.clone(), spotting_map(&best_preds, &annotations)?);
        let mut history = Vec::new();
        let mut stale = 0;
        for epoch in 1..=hp.pretrain_epochs + hp.epochs {
            let mut order: Vec<usize> = (0..train.videos.len()).collect();
            order.shuffle(&mut seed::rng(hp.seed, &[20, epoch as u64]));
            let mut loss = 0.0;
            for batch in order.chunks(hp.batch_size) {
                let mut grad = vec![0.0; model.data.len()];
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    loss += model.video_loss(&train.videos[i], &mut grad, scale)?;
                }
                adam_step(&mut model.data, &grad, &mut opt)?;
            }
            let preds = model.predict(val)?;
            let map = spotting_map(&preds, &annotations)?;
            history.push((epoch, loss / train.videos.len() as f64, map));
            if map > best.1 {
                best = (model.clone(), map);
                best_preds = preds;
                stale = 0;
            } else {
                stale += 1;
                if stale >= hp.patience {
                    break;
                }
            }
        }
        Ok(SegmentationOutcome {
            model: best.0,
            history,
            val_map: best.1,
            val_predictions: best_preds,
        })
    }
}

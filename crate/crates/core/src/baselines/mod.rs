//! Comparison systems: detector redraw, per-frame segmentation baselines,
//! supervised and memory-less variants of the spotter, uniform frame
//! subsampling and a ground-truth oracle.

mod redraw;
mod segmentation;

pub use redraw::{read_detections, redraw_detections, write_detections, DetectionSegment, Detections};
pub use segmentation::{FrameModel, FrameModelKind, SegmentationOutcome};

use crate::dataset::{AnnotationSet, Dataset, FrameLabel, VideoAnnotation};
use crate::env::{BrowseActionSet, OraclePolicy};
use crate::error::Result;
use crate::trainer::{train, HyperParams, Objective, TrainOutcome};

/// Per-frame spot targets: the segment's class at its floor midpoint,
/// background everywhere else.
pub fn center_targets(annotation: &VideoAnnotation) -> Vec<FrameLabel> {
    let mut out = vec![FrameLabel::Background; annotation.num_frames];
    for s in &annotation.segments {
        out[s.center()] = FrameLabel::Action(s.label);
    }
    out
}

/// The spotter network trained on center targets with the browser held at
/// the next frame; no rewards.
pub fn supervised_actionspotter(train_set: &Dataset, val: &Dataset, hp: &HyperParams) -> Result<TrainOutcome> {
    let hp = HyperParams {
        objective: Objective::Supervised,
        ..hp.clone()
    };
    train(train_set, val, &BrowseActionSet::uniform(1)?, &hp)
}

/// Same pipeline with the memory removed: heads read the raw features.
pub fn no_memory_variant(hp: &HyperParams) -> HyperParams {
    HyperParams {
        memory: false,
        ..hp.clone()
    }
}

/// Action set of the fixed-stride browser. Training the full pipeline with
/// it learns the selector and classifier while the browser always moves
/// `stride` rows.
pub fn uniform_policy(stride: usize) -> Result<BrowseActionSet> {
    BrowseActionSet::uniform(stride)
}

/// Keeps each segment's center row with its true label and likelihood 1.
pub fn oracle_policy(gts: &AnnotationSet, chunk_span: usize) -> OraclePolicy {
    OraclePolicy::new(gts, chunk_span, &BrowseActionSet::uniform(1).expect("stride 1 is valid"))
}

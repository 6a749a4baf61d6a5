//! On-disk data: feature files, annotations, predictions, and a synthetic
//! generator for desk-scale experiments.
//!
//! A dataset directory holds `annotations.json` plus one
//! `features/<video id>.aspt` file per annotated video.

mod annotations;
mod features;
mod predictions;
mod synth;

use std::fs;
use std::path::Path;

pub use annotations::{
    frame_label, read_annotations, write_annotations, AnnotationSet, FrameLabel,
    GroundTruthSegment, VideoAnnotation,
};
pub use features::{
    read_feature_file, write_feature_file, FeatureSequence, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use predictions::{
    predictions_from_jsonl, predictions_to_jsonl, read_predictions, threshold,
    write_predictions, PredictionSet, SpotPrediction,
};
pub use synth::{synth_generate, SynthConfig, SynthDataset};

use crate::error::{Error, Result};

/// One video: its features and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub features: FeatureSequence,
    pub annotation: VideoAnnotation,
}

impl Video {
    pub fn id(&self) -> &str {
        &self.annotation.id
    }

    /// Raw frame index of feature row `index`.
    pub fn frame_of_row(&self, index: usize) -> usize {
        self.features
            .frame_of_row(index, self.annotation.num_frames)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_classes: usize,
    pub videos: Vec<Video>,
}

impl Dataset {
    pub fn feature_dim(&self) -> usize {
        self.videos.first().map_or(0, |v| v.features.dim())
    }

    pub fn annotations(&self) -> AnnotationSet {
        AnnotationSet {
            num_classes: self.num_classes,
            videos: self.videos.iter().map(|v| v.annotation.clone()).collect(),
        }
    }

    /// Checks that features and annotations agree on every video.
    pub fn validate(&self) -> Result<()> {
        let dim = self.feature_dim();
        for v in &self.videos {
            let fail = |reason: String| Error::Annotation {
                video: v.id().to_string(),
                reason,
            };
            if v.features.dim() != dim {
                return Err(fail(format!(
                    "feature dimension {} differs from {dim}",
                    v.features.dim()
                )));
            }
            let span = v.features.chunk_span();
            let needed = v.annotation.num_frames.div_ceil(span);
            if v.features.frames() != needed {
                return Err(fail(format!(
                    "{} feature rows of span {span} do not cover {} frames",
                    v.features.frames(),
                    v.annotation.num_frames
                )));
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let set = read_annotations(dir.join("annotations.json"))?;
        let mut videos = Vec::with_capacity(set.videos.len());
        for annotation in set.videos {
            let features =
                read_feature_file(dir.join("features").join(format!("{}.aspt", annotation.id)))?;
            videos.push(Video {
                features,
                annotation,
            });
        }
        let ds = Self {
            num_classes: set.num_classes,
            videos,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let feat_dir = dir.join("features");
        fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
        write_annotations(&self.annotations(), dir.join("annotations.json"))?;
        for v in &self.videos {
            write_feature_file(&v.features, feat_dir.join(format!("{}.aspt", v.id())))?;
        }
        Ok(())
    }
}

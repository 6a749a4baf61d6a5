use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{PredictionSet, SpotPrediction};
use crate::error::{Error, Result};

/// A detector's output segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSegment {
    pub video: String,
    pub label: usize,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub detections: Vec<DetectionSegment>,
}

/// One spot per detection at the floor midpoint, score and label kept.
pub fn redraw_detections(segments: &[DetectionSegment]) -> Result<PredictionSet> {
    segments
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d.start > d.end {
                return Err(Error::Prediction {
                    line: i + 1,
                    reason: format!("detection starts at {} after its end {}", d.start, d.end),
                });
            }
            if !d.score.is_finite() {
                return Err(Error::Prediction {
                    line: i + 1,
                    reason: "detection score is not finite".into(),
                });
            }
            Ok(SpotPrediction {
                video: d.video.clone(),
                t: (d.start + d.end) / 2,
                score: d.score,
                label: d.label,
            })
        })
        .collect()
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionSegment>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: Detections = serde_json::from_str(&text)?;
    Ok(parsed.detections)
}

pub fn write_detections(segments: &[DetectionSegment], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = Detections {
        detections: segments.to_vec(),
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?).map_err(|e| Error::io(path, e))
}

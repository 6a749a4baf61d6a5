use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spot frame: video, frame index `t`, ranking score, and class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotPrediction {
    pub video: String,
    pub t: usize,
    pub score: f64,
    pub label: usize,
}

pub type PredictionSet = Vec<SpotPrediction>;

/// Keeps only spots scoring strictly above `sigma`.
pub fn threshold(preds: &[SpotPrediction], sigma: f64) -> PredictionSet {
    preds.iter().filter(|p| p.score > sigma).cloned().collect()
}

pub fn predictions_to_jsonl(preds: &[SpotPrediction]) -> Result<String> {
    let mut out = String::new();
    for (i, p) in preds.iter().enumerate() {
        if !p.score.is_finite() {
            return Err(Error::Prediction {
                line: i + 1,
                reason: "score is not finite".into(),
            });
        }
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn predictions_from_jsonl(text: &str) -> Result<PredictionSet> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: SpotPrediction = serde_json::from_str(line).map_err(|e| Error::Prediction {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if !p.score.is_finite() {
            return Err(Error::Prediction {
                line: i + 1,
                reason: "score is not finite".into(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    predictions_from_jsonl(&text)
}

pub fn write_predictions(preds: &[SpotPrediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = predictions_to_jsonl(preds)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

use serde::{Deserialize, Serialize};

use super::skip_ratio;
use crate::dataset::SpotPrediction;
use crate::error::Result;

/// Everything recorded about one step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Feature row processed.
    pub row: usize,
    /// Raw frame of that row.
    pub frame: usize,
    /// Index of the chosen displacement.
    pub browse: usize,
    pub displacement: usize,
    pub browse_log_prob: f64,
    pub keep: bool,
    pub keep_log_prob: f64,
    /// Browse entropy plus keep/drop entropy.
    pub entropy: f64,
    pub class_probs: Vec<f64>,
    pub likelihood: f64,
    pub label: usize,
    pub value: f64,
    /// Absent for inference-only episodes.
    pub reward: Option<f64>,
    /// mAP of this video after the step, when ground truth is known.
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub video: String,
    pub rows: usize,
    pub steps: Vec<StepRecord>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn skip_ratio(&self) -> f64 {
        skip_ratio(self.steps.len(), self.rows)
    }

    /// Spots emitted during the episode, in step order.
    pub fn spots(&self) -> Vec<SpotPrediction> {
        self.steps
            .iter()
            .filter(|s| s.keep)
            .map(|s| SpotPrediction {
                video: self.video.clone(),
                t: s.frame,
                score: s.likelihood,
                label: s.label,
            })
            .collect()
    }

    /// Per-step rewards; missing ones count as zero.
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward.unwrap_or(0.0)).collect()
    }

    pub fn final_map(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.map)
    }

    pub fn mean_entropy(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.entropy).sum::<f64>() / self.steps.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

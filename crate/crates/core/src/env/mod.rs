//! The browsing episode.
//!
//! An agent starts at the first feature row of a video. At every step it
//! sees the row under its cursor, may emit that row as a spot, and picks a
//! displacement from a small fixed set. A displacement that would leave
//! the video lands on the last row instead, which is processed before the
//! episode ends, so the last row of every episode is the last row of the
//! video.
//!
//! The reward of a step is `γ·mAP(after) − mAP(before) + ρ·H`, where the
//! mAP is computed on this one video and `H` is the entropy of the policy
//! at that step. With `ρ = 0` the discounted rewards of an episode sum to
//! `γ^(N+1)` times its final mAP.

mod policy;
mod trace;

use serde::{Deserialize, Serialize};

pub use policy::{rollout, Decision, Mode, OraclePolicy, Policy, RandomPolicy, RolloutParams};
pub use trace::{EpisodeTrace, StepRecord};

use crate::dataset::{AnnotationSet, FeatureSequence, SpotPrediction, VideoAnnotation};
use crate::error::{Error, Result};
use crate::metric::MapAccumulator;

/// Allowed cursor displacements, in the order the browser head scores them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BrowseActionSet(Vec<usize>);

impl Default for BrowseActionSet {
    /// Next frame, skip one, skip three.
    fn default() -> Self {
        Self(vec![1, 2, 4])
    }
}

impl BrowseActionSet {
    pub fn new(displacements: Vec<usize>) -> Result<Self> {
        if displacements.is_empty() {
            return Err(Error::Config("browse action set is empty".into()));
        }
        if displacements.contains(&0) {
            return Err(Error::Config("browse displacements must be at least 1".into()));
        }
        Ok(Self(displacements))
    }

    /// A single fixed stride.
    pub fn uniform(stride: usize) -> Result<Self> {
        Self::new(vec![stride])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn displacement(&self, index: usize) -> Result<usize> {
        self.0.get(index).copied().ok_or(Error::OutOfRange {
            index,
            len: self.0.len(),
        })
    }

    pub fn displacements(&self) -> &[usize] {
        &self.0
    }

    /// Index of the smallest displacement.
    pub fn slowest(&self) -> usize {
        (0..self.0.len()).min_by_key(|&i| self.0[i]).unwrap_or(0)
    }
}

impl TryFrom<Vec<usize>> for BrowseActionSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BrowseActionSet> for Vec<usize> {
    fn from(a: BrowseActionSet) -> Self {
        a.0
    }
}

/// What one [`BrowseEnv::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Row processed by this step.
    pub row: usize,
    /// Raw frame of that row.
    pub frame: usize,
    pub map_prev: f64,
    pub map_new: f64,
    pub terminal: bool,
}

/// State machine of one episode.
#[derive(Debug, Clone)]
pub struct BrowseEnv {
    actions: BrowseActionSet,
    num_classes: usize,
    video: String,
    rows: usize,
    num_frames: usize,
    features_span: usize,
    acc: Option<MapAccumulator>,
    cursor: usize,
    steps: usize,
    spots: Vec<SpotPrediction>,
    map: f64,
    done: bool,
}

impl BrowseEnv {
    /// Starts an episode on the first row. Without an annotation the
    /// episode can still run but has no rewards.
    pub fn reset(
        features: &FeatureSequence,
        annotation: Option<&VideoAnnotation>,
        num_classes: usize,
        actions: &BrowseActionSet,
    ) -> Result<Self> {
        if features.frames() == 0 {
            return Err(Error::Contract("empty feature sequence".into()));
        }
        let num_frames = annotation.map_or(features.frames() * features.chunk_span(), |a| a.num_frames);
        let acc = annotation.map(|a| {
            MapAccumulator::new(&AnnotationSet {
                num_classes,
                videos: vec![a.clone()],
            })
        });
        Ok(Self {
            actions: actions.clone(),
            num_classes,
            video: features.video_id.clone(),
            rows: features.frames(),
            num_frames,
            features_span: features.chunk_span(),
            acc,
            cursor: 0,
            steps: 0,
            spots: Vec::new(),
            map: 0.0,
            done: false,
        })
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn spots(&self) -> &[SpotPrediction] {
        &self.spots
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn actions(&self) -> &BrowseActionSet {
        &self.actions
    }

    pub fn has_rewards(&self) -> bool {
        self.acc.is_some()
    }

    /// Raw frame under the cursor.
    pub fn frame(&self) -> usize {
        let center = self.cursor * self.features_span + (self.features_span - 1) / 2;
        center.min(self.num_frames - 1)
    }

    /// mAP of the spots emitted so far on this video.
    pub fn current_map(&self) -> Result<f64> {
        if self.acc.is_none() {
            return Err(Error::RewardUnavailable);
        }
        Ok(self.map)
    }

    /// Processes the row under the cursor: optionally emits it as a spot
    /// `(likelihood, label)`, then moves by the displacement at `browse`.
    pub fn step(&mut self, browse: usize, spot: Option<(f64, usize)>) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract("step after the episode ended".into()));
        }
        let displacement = self.actions.displacement(browse)?;
        let row = self.cursor;
        let frame = self.frame();
        let map_prev = self.map;
        if let Some((score, label)) = spot {
            if label >= self.num_classes {
                return Err(Error::OutOfRange {
                    index: label,
                    len: self.num_classes,
                });
            }
            if let Some(acc) = &mut self.acc {
                self.map = acc.insert_indexed(0, frame, score, label)?;
            } else if !score.is_finite() {
                return Err(Error::Contract("spot score is not finite".into()));
            }
            self.spots.push(SpotPrediction {
                video: self.video.clone(),
                t: frame,
                score,
                label,
            });
        }
        self.steps += 1;
        let last = self.rows - 1;
        if self.cursor == last {
            self.done = true;
        } else {
            self.cursor = (self.cursor + displacement).min(last);
        }
        Ok(StepOutcome {
            row,
            frame,
            map_prev,
            map_new: self.map,
            terminal: self.done,
        })
    }
}

/// Shaped reward of one step.
pub fn reward(map_prev: f64, map_new: f64, entropy: f64, gamma: f64, rho: f64) -> f64 {
    gamma * map_new - map_prev + rho * entropy
}

/// Discounted sums of an episode's rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Returns {
    /// `R_N = Σ_k γ^k r_k`, steps numbered from 1.
    pub total: f64,
    /// `R_N − R_n` for each step `n`.
    pub to_go: Vec<f64>,
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> Returns {
    let mut partial = Vec::with_capacity(rewards.len());
    let mut acc = 0.0;
    let mut g = 1.0;
    for r in rewards {
        g *= gamma;
        acc += g * r;
        partial.push(acc);
    }
    Returns {
        total: acc,
        to_go: partial.iter().map(|p| acc - p).collect(),
    }
}

/// Return from each step onward, discounted relative to that step and
/// including its own reward: `G_n = Σ_{k≥n} γ^(k−n) r_k`.
pub fn returns_from_step(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Fraction of rows never visited.
pub fn skip_ratio(steps: usize, rows: usize) -> f64 {
    1.0 - steps as f64 / rows as f64
}

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{reward, BrowseActionSet, BrowseEnv, EpisodeTrace, StepRecord};
use crate::dataset::{AnnotationSet, FeatureSequence, VideoAnnotation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sample both actions; only kept rows become spots.
    Train,
    /// Take the most likely displacement; every visited row becomes a
    /// spot scored by its keep probability.
    Test,
}

/// What a policy proposes at one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub browse: usize,
    pub browse_log_prob: f64,
    pub browse_entropy: f64,
    pub keep: bool,
    pub keep_log_prob: f64,
    pub keep_entropy: f64,
    /// Probability of keeping the row; the spot's ranking score.
    pub likelihood: f64,
    pub label: usize,
    pub class_probs: Vec<f64>,
    pub value: f64,
}

impl Decision {
    /// A deterministic decision with zero log-probabilities and entropies.
    pub fn fixed(browse: usize, keep: bool, likelihood: f64, label: usize) -> Self {
        Self {
            browse,
            browse_log_prob: 0.0,
            browse_entropy: 0.0,
            keep,
            keep_log_prob: 0.0,
            keep_entropy: 0.0,
            likelihood,
            label,
            class_probs: Vec::new(),
            value: 0.0,
        }
    }
}

pub trait Policy {
    /// Called once before the first row of every episode.
    fn begin(&mut self, features: &FeatureSequence) -> Result<()>;

    fn decide(
        &mut self,
        features: &FeatureSequence,
        row: usize,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutParams {
    pub gamma: f64,
    pub rho: f64,
}

impl Default for RolloutParams {
    fn default() -> Self {
        Self { gamma: 1.0, rho: 0.0 }
    }
}

/// Runs one episode. Train mode needs the annotation to compute rewards.
pub fn rollout(
    policy: &mut dyn Policy,
    features: &FeatureSequence,
    annotation: Option<&VideoAnnotation>,
    num_classes: usize,
    actions: &BrowseActionSet,
    mode: Mode,
    params: RolloutParams,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeTrace> {
    if mode == Mode::Train && annotation.is_none() {
        return Err(Error::RewardUnavailable);
    }
    let mut env = BrowseEnv::reset(features, annotation, num_classes, actions)?;
    policy.begin(features)?;
    let mut steps = Vec::new();
    while !env.is_done() {
        let row = env.cursor();
        let d = policy.decide(features, row, mode, rng)?;
        let keep = mode == Mode::Test || d.keep;
        let out = env.step(d.browse, keep.then_some((d.likelihood, d.label)))?;
        let entropy = d.browse_entropy + d.keep_entropy;
        let rewarded = env.has_rewards() && mode == Mode::Train;
        steps.push(StepRecord {
            row,
            frame: out.frame,
            browse: d.browse,
            displacement: actions.displacement(d.browse)?,
            browse_log_prob: d.browse_log_prob,
            keep,
            keep_log_prob: d.keep_log_prob,
            entropy,
            class_probs: d.class_probs,
            likelihood: d.likelihood,
            label: d.label,
            value: d.value,
            reward: rewarded.then(|| reward(out.map_prev, out.map_new, entropy, params.gamma, params.rho)),
            map: env.has_rewards().then_some(out.map_new),
        });
    }
    Ok(EpisodeTrace {
        video: features.video_id.clone(),
        rows: features.frames(),
        steps,
    })
}

/// Knows the ground truth: keeps exactly the row holding each segment's
/// center, with its true label and likelihood 1, and never skips.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    actions: BrowseActionSet,
    /// Per video: center row → label.
    centers: HashMap<String, HashMap<usize, usize>>,
    current: HashMap<usize, usize>,
}

impl OraclePolicy {
    pub fn new(gts: &AnnotationSet, chunk_span: usize, actions: &BrowseActionSet) -> Self {
        let centers = gts
            .videos
            .iter()
            .map(|v| {
                let rows = v
                    .segments
                    .iter()
                    .map(|s| (s.center() / chunk_span, s.label))
                    .collect();
                (v.id.clone(), rows)
            })
            .collect();
        Self {
            actions: actions.clone(),
            centers,
            current: HashMap::new(),
        }
    }
}

impl Policy for OraclePolicy {
    fn begin(&mut self, features: &FeatureSequence) -> Result<()> {
        self.current = self
            .centers
            .get(&features.video_id)
            .cloned()
            .ok_or_else(|| Error::UnknownVideo(features.video_id.clone()))?;
        Ok(())
    }

    fn decide(&mut self, _: &FeatureSequence, row: usize, _: Mode, _: &mut ChaCha8Rng) -> Result<Decision> {
        let browse = self.actions.slowest();
        Ok(match self.current.get(&row) {
            Some(&label) => Decision::fixed(browse, true, 1.0, label),
            None => Decision::fixed(browse, false, 0.0, 0),
        })
    }
}

/// Uniformly random actions and scores; a chance-level reference.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub num_classes: usize,
    pub num_actions: usize,
    pub keep_prob: f64,
}

impl Policy for RandomPolicy {
    fn begin(&mut self, _: &FeatureSequence) -> Result<()> {
        Ok(())
    }

    fn decide(&mut self, _: &FeatureSequence, _: usize, _: Mode, rng: &mut ChaCha8Rng) -> Result<Decision> {
        let browse = rng.random_range(0..self.num_actions);
        let keep = rng.random_bool(self.keep_prob);
        let likelihood = rng.random::<f64>();
        let label = rng.random_range(0..self.num_classes);
        let mut d = Decision::fixed(browse, keep, likelihood, label);
        d.browse_log_prob = -(self.num_actions as f64).ln();
        d.keep_log_prob = if keep { self.keep_prob.ln() } else { (1.0 - self.keep_prob).ln() };
        d.browse_entropy = (self.num_actions as f64).ln();
        let p = self.keep_prob;
        d.keep_entropy = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        Ok(d)
    }
}

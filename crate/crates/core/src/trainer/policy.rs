use rand_chacha::ChaCha8Rng;

use crate::dataset::FeatureSequence;
use crate::env::{Decision, Mode, Policy};
use crate::error::Result;
use crate::nn::{Categorical, Head, ModelParameters, StepCache};

/// The network as a browsing policy.
///
/// Keeps the forward cache of every step so a training episode can be
/// backpropagated without a second forward pass.
#[derive(Debug)]
pub struct SpotterPolicy<'a> {
    params: &'a ModelParameters,
    /// Forces this displacement index instead of consulting the browser.
    force_browse: Option<usize>,
    state: Vec<f64>,
    caches: Vec<StepCache>,
}

impl<'a> SpotterPolicy<'a> {
    pub fn new(params: &'a ModelParameters) -> Self {
        Self {
            params,
            force_browse: None,
            state: params.initial_state(),
            caches: Vec::new(),
        }
    }

    pub fn with_fixed_browse(params: &'a ModelParameters, browse: usize) -> Self {
        Self {
            force_browse: Some(browse),
            ..Self::new(params)
        }
    }

    /// Forward caches of the last episode, one per step.
    pub fn take_caches(&mut self) -> Vec<StepCache> {
        std::mem::take(&mut self.caches)
    }
}

impl Policy for SpotterPolicy<'_> {
    fn begin(&mut self, _: &FeatureSequence) -> Result<()> {
        self.state = self.params.initial_state();
        self.caches.clear();
        Ok(())
    }

    fn decide(
        &mut self,
        features: &FeatureSequence,
        row: usize,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision> {
        let cache = self.params.forward_step(features.row(row), &self.state)?;
        if self.params.shape.memory {
            self.state.clone_from(&cache.state);
        }
        let keep = Categorical::new(cache.output(Head::Selector))?;
        let classes = Categorical::new(cache.output(Head::Classifier))?;
        let browser = Categorical::new(cache.output(Head::Browser))?;
        let c = self.params.shape.num_classes;
        let label = crate::nn::linalg::argmax(&classes.probs[..c]);

        let (keep_choice, browse) = match mode {
            Mode::Train => (keep.sample(rng) == 1, browser.sample(rng)),
            Mode::Test => (keep.argmax() == 1, browser.argmax()),
        };
        let (browse, browse_log_prob, browse_entropy) = match self.force_browse {
            Some(b) => (b, 0.0, 0.0),
            None => (browse, browser.log_probs[browse], browser.entropy()),
        };
        let d = Decision {
            browse,
            browse_log_prob,
            browse_entropy,
            keep: keep_choice,
            keep_log_prob: keep.log_probs[usize::from(keep_choice)],
            keep_entropy: keep.entropy(),
            likelihood: keep.probs[1],
            label,
            class_probs: classes.probs,
            value: cache.value(),
        };
        self.caches.push(cache);
        Ok(d)
    }
}

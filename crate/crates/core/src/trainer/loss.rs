//! Per-episode losses. Each function adds `weight` times the gradient of
//! its term with respect to the head outputs into `grads` and returns the
//! unweighted value.

use crate::dataset::VideoAnnotation;
use crate::env::{returns_from_step, EpisodeTrace};
use crate::error::{Error, Result};
use crate::nn::{self, Categorical, GradientBundle, Head, ModelParameters, OutputGrads, StepCache};

/// Frozen per-step targets of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTargets {
    /// Classifier target per step, background = `num_classes`.
    pub labels: Vec<usize>,
    /// Selector target per step: is the row a segment center.
    pub centers: Vec<bool>,
    /// Discounted return from each step onward.
    pub returns: Vec<f64>,
    /// Return minus the critic's estimate at rollout time.
    pub advantages: Vec<f64>,
}

impl EpisodeTargets {
    pub fn new(
        trace: &EpisodeTrace,
        annotation: &VideoAnnotation,
        num_classes: usize,
        chunk_span: usize,
        gamma: f64,
    ) -> Result<Self> {
        let labels = trace
            .steps
            .iter()
            .map(|s| Ok(annotation.frame_label(s.frame)?.class_index(num_classes)))
            .collect::<Result<Vec<_>>>()?;
        let center_rows: Vec<usize> = annotation
            .segments
            .iter()
            .map(|s| s.center() / chunk_span)
            .collect();
        let centers = trace.steps.iter().map(|s| center_rows.contains(&s.row)).collect();
        let returns = returns_from_step(&trace.rewards(), gamma);
        let advantages = returns
            .iter()
            .zip(&trace.steps)
            .map(|(g, s)| g - s.value)
            .collect();
        Ok(Self {
            labels,
            centers,
            returns,
            advantages,
        })
    }
}

fn check_len(caches: &[StepCache], n: usize, what: &str) -> Result<()> {
    if caches.len() != n {
        return Err(Error::Contract(format!(
            "{} cached steps but {n} {what}",
            caches.len()
        )));
    }
    Ok(())
}

/// Mean cross-entropy of the classifier against per-row labels.
pub fn loss_cls(caches: &[StepCache], labels: &[usize], weight: f64, grads: &mut [OutputGrads]) -> Result<f64> {
    check_len(caches, labels.len(), "labels")?;
    let n = caches.len().max(1) as f64;
    let mut total = 0.0;
    for ((c, &y), g) in caches.iter().zip(labels).zip(grads.iter_mut()) {
        let dist = Categorical::new(c.output(Head::Classifier))?;
        total -= dist.log_probs[y];
        nn::linalg::axpy(weight / n, &dist.d_cross_entropy(y), g.head_mut(Head::Classifier));
    }
    Ok(total / n)
}

/// Mean cross-entropy of the keep/drop head against center targets.
pub fn loss_selector(caches: &[StepCache], centers: &[bool], weight: f64, grads: &mut [OutputGrads]) -> Result<f64> {
    check_len(caches, centers.len(), "selector targets")?;
    let n = caches.len().max(1) as f64;
    let mut total = 0.0;
    for ((c, &keep), g) in caches.iter().zip(centers).zip(grads.iter_mut()) {
        let dist = Categorical::new(c.output(Head::Selector))?;
        let y = usize::from(keep);
        total -= dist.log_probs[y];
        nn::linalg::axpy(weight / n, &dist.d_cross_entropy(y), g.head_mut(Head::Selector));
    }
    Ok(total / n)
}

/// Mean of `½ (v − G)²` with the returns held constant.
pub fn loss_critic(caches: &[StepCache], returns: &[f64], weight: f64, grads: &mut [OutputGrads]) -> Result<f64> {
    check_len(caches, returns.len(), "returns")?;
    let n = caches.len().max(1) as f64;
    let mut total = 0.0;
    for ((c, &target), g) in caches.iter().zip(returns).zip(grads.iter_mut()) {
        let diff = c.value() - target;
        total += 0.5 * diff * diff;
        g.head_mut(Head::Critic)[0] += weight * diff / n;
    }
    Ok(total / n)
}

/// `Σ_n (log π_browse + log π_keep) · A_n` with the advantages held
/// constant. The gradient added is that of `−weight · surrogate`, since
/// the surrogate is maximized.
pub fn actor_surrogate(
    caches: &[StepCache],
    trace: &EpisodeTrace,
    advantages: &[f64],
    learned_browse: bool,
    weight: f64,
    grads: &mut [OutputGrads],
) -> Result<f64> {
    check_len(caches, advantages.len(), "advantages")?;
    check_len(caches, trace.steps.len(), "trace steps")?;
    let mut total = 0.0;
    for (((c, s), &a), g) in caches.iter().zip(&trace.steps).zip(advantages).zip(grads.iter_mut()) {
        let keep = Categorical::new(c.output(Head::Selector))?;
        let k = usize::from(s.keep);
        let mut log_prob = keep.log_probs[k];
        nn::linalg::axpy(-weight * a, &keep.d_log_prob(k), g.head_mut(Head::Selector));
        if learned_browse {
            let browse = Categorical::new(c.output(Head::Browser))?;
            log_prob += browse.log_probs[s.browse];
            nn::linalg::axpy(-weight * a, &browse.d_log_prob(s.browse), g.head_mut(Head::Browser));
        }
        total += log_prob * a;
    }
    Ok(total)
}

/// How much each term contributes to the minimized objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub cls: f64,
    pub selector: f64,
    pub critic: f64,
    pub actor: f64,
    pub learned_browse: bool,
}

/// Values of each term for one episode or averaged over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub cls: f64,
    pub selector: f64,
    pub critic: f64,
    pub surrogate: f64,
    pub total: f64,
}

impl LossReport {
    pub fn add_scaled(&mut self, other: &LossReport, scale: f64) {
        self.cls += scale * other.cls;
        self.selector += scale * other.selector;
        self.critic += scale * other.critic;
        self.surrogate += scale * other.surrogate;
        self.total += scale * other.total;
    }
}

/// `cls·L_cls + selector·L_sf + critic·L_critic − actor·surrogate` and its
/// gradient for one episode.
pub fn episode_loss(
    params: &ModelParameters,
    caches: &[StepCache],
    trace: &EpisodeTrace,
    targets: &EpisodeTargets,
    weights: &LossWeights,
    truncate: Option<usize>,
) -> Result<(LossReport, GradientBundle)> {
    let mut grads = vec![OutputGrads::zeros(&params.shape); caches.len()];
    let mut r = LossReport::default();
    if weights.cls != 0.0 {
        r.cls = loss_cls(caches, &targets.labels, weights.cls, &mut grads)?;
    }
    if weights.selector != 0.0 {
        r.selector = loss_selector(caches, &targets.centers, weights.selector, &mut grads)?;
    }
    if weights.critic != 0.0 {
        r.critic = loss_critic(caches, &targets.returns, weights.critic, &mut grads)?;
    }
    if weights.actor != 0.0 {
        r.surrogate = actor_surrogate(
            caches,
            trace,
            &targets.advantages,
            weights.learned_browse,
            weights.actor,
            &mut grads,
        )?;
    }
    r.total = weights.cls * r.cls + weights.selector * r.selector + weights.critic * r.critic
        - weights.actor * r.surrogate;
    let g = nn::backward(params, caches, &grads, truncate)?;
    Ok((r, g))
}

/// Re-runs the network along the rows an episode visited.
pub fn replay(
    params: &ModelParameters,
    features: &crate::dataset::FeatureSequence,
    trace: &EpisodeTrace,
) -> Result<Vec<StepCache>> {
    let mut state = params.initial_state();
    let mut caches = Vec::with_capacity(trace.steps.len());
    for s in &trace.steps {
        let c = params.forward_step(features.row(s.row), &state)?;
        if params.shape.memory {
            state.clone_from(&c.state);
        }
        caches.push(c);
    }
    Ok(caches)
}

/// One gradient step on the temperature: `ρ ← max(0, ρ − lr (H̄ − H̄*))`.
pub fn temperature_update(rho: f64, mean_entropy: f64, target: f64, lr: f64) -> f64 {
    (rho - lr * (mean_entropy - target)).max(0.0)
}

//! Training: supervised warm start, then actor-critic episodes.
//!
//! The minimized objective per episode is
//! `L_cls + λ1·L_critic − λ2·Σ_n (log π_browse + log π_keep)·A_n`, where
//! `A_n` is the return from step `n` onward minus the critic's estimate,
//! held constant. Gradients are averaged over the episodes of a batch.
//! The entropy temperature `ρ` is then nudged toward a target entropy.

mod loss;
mod policy;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use loss::{
    actor_surrogate, episode_loss, loss_cls, loss_critic, loss_selector, replay, temperature_update,
    EpisodeTargets, LossReport, LossWeights,
};
pub use policy::SpotterPolicy;

use crate::dataset::{threshold, Dataset, PredictionSet};
use crate::env::{rollout, BrowseActionSet, EpisodeTrace, Mode, Policy, RolloutParams};
use crate::error::{Error, Result};
use crate::metric::{evaluate_spots, MapReport};
use crate::nn::{adam_step, Checkpoint, ModelParameters, ModelShape, OptState, StepCache};
use crate::seed;

/// What the network is trained to do after the warm start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Rewards from the change in mAP.
    Reinforce,
    /// Cross-entropy against segment centers and frame labels only.
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub gamma: f64,
    /// Initial entropy temperature.
    pub rho: f64,
    pub temperature_lr: f64,
    /// Defaults to half the maximum joint entropy.
    pub target_entropy: Option<f64>,
    pub lambda_critic: f64,
    pub lambda_actor: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Spots at or below this likelihood are dropped from outputs.
    pub sigma: f64,
    pub seed: u64,
    pub hidden: usize,
    /// Steps of backpropagation through time; `None` is the whole episode.
    pub bptt: Option<usize>,
    /// Rescale each batch gradient to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
    pub memory: bool,
    pub objective: Objective,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            rho: 0.0,
            temperature_lr: 0.01,
            target_entropy: None,
            lambda_critic: 1.0,
            lambda_actor: 1.0,
            lr: 1e-3,
            batch_size: 32,
            pretrain_epochs: 5,
            epochs: 100,
            patience: 10,
            sigma: 0.0,
            seed: 0,
            hidden: 64,
            bptt: None,
            max_grad_norm: None,
            memory: true,
            objective: Objective::Reinforce,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.gamma,
            self.rho,
            self.temperature_lr,
            self.target_entropy.unwrap_or(0.0),
            self.lambda_critic,
            self.lambda_actor,
            self.lr,
            self.sigma,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("hyperparameters must be finite".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if self.rho < 0.0 || self.target_entropy.is_some_and(|h| h < 0.0) {
            return Err(Error::Config("temperature and target entropy must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Config(format!("sigma {} outside [0, 1]", self.sigma)));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Config("batch size and hidden width must be positive".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn target_entropy(&self, actions: &BrowseActionSet) -> f64 {
        self.target_entropy
            .unwrap_or_else(|| 0.5 * ((actions.len() as f64).ln() + 2f64.ln()))
    }

    pub fn shape(&self, data: &Dataset, actions: &BrowseActionSet) -> ModelShape {
        ModelShape {
            input_dim: data.feature_dim(),
            hidden: self.hidden,
            num_classes: data.num_classes,
            num_actions: actions.len(),
            memory: self.memory,
        }
    }

    fn weights(&self) -> LossWeights {
        match self.objective {
            Objective::Reinforce => LossWeights {
                cls: 1.0,
                selector: 0.0,
                critic: self.lambda_critic,
                actor: self.lambda_actor,
                learned_browse: true,
            },
            Objective::Supervised => Self::supervised_weights(),
        }
    }

    fn supervised_weights() -> LossWeights {
        LossWeights {
            cls: 1.0,
            selector: 1.0,
            critic: 0.0,
            actor: 0.0,
            learned_browse: false,
        }
    }
}

/// One row of the training report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    pub loss_cls: f64,
    pub loss_selector: f64,
    pub loss_critic: f64,
    pub surrogate: f64,
    pub loss_total: f64,
    /// Mean final per-video mAP of the training episodes.
    pub train_map: f64,
    pub val_map: f64,
    pub val_skip_ratio: f64,
    pub mean_entropy: f64,
    pub rho: f64,
}

/// Result of evaluating a policy on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MapReport,
    pub skip_ratio: f64,
    pub predictions: PredictionSet,
    pub traces: Vec<EpisodeTrace>,
}

/// Test-mode episodes over every video, pooled into one mAP.
pub fn evaluate_policy(
    policy: &mut dyn Policy,
    data: &Dataset,
    actions: &BrowseActionSet,
    sigma: f64,
) -> Result<Evaluation> {
    let mut rng = seed::rng(0, &[]);
    let mut predictions = Vec::new();
    let mut traces = Vec::with_capacity(data.videos.len());
    for v in &data.videos {
        let trace = rollout(
            policy,
            &v.features,
            Some(&v.annotation),
            data.num_classes,
            actions,
            Mode::Test,
            RolloutParams::default(),
            &mut rng,
        )?;
        predictions.extend(threshold(&trace.spots(), sigma));
        traces.push(trace);
    }
    let skip_ratio = mean(traces.iter().map(EpisodeTrace::skip_ratio));
    let report = evaluate_spots(&predictions, &data.annotations())?;
    Ok(Evaluation {
        report,
        skip_ratio,
        predictions,
        traces,
    })
}

/// Evaluates a checkpoint with greedy actions.
pub fn evaluate(ckpt: &Checkpoint, data: &Dataset) -> Result<Evaluation> {
    let shape = ckpt.params.shape;
    if shape.input_dim != data.feature_dim() || shape.num_classes != data.num_classes {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {} features and {} classes, dataset has {} and {}",
            shape.input_dim,
            shape.num_classes,
            data.feature_dim(),
            data.num_classes
        )));
    }
    let mut policy = SpotterPolicy::new(&ckpt.params);
    evaluate_policy(&mut policy, data, &ckpt.actions, ckpt.hyper.sigma)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// One training episode ready for the update.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trace: EpisodeTrace,
    pub caches: Vec<StepCache>,
    pub targets: EpisodeTargets,
}

/// Averages the episode gradients of a batch, applies one Adam step and
/// returns the averaged losses.
pub fn combined_step(
    params: &mut ModelParameters,
    opt: &mut OptState,
    episodes: &[Episode],
    weights: &LossWeights,
    truncate: Option<usize>,
    max_grad_norm: Option<f64>,
) -> Result<LossReport> {
    if episodes.is_empty() {
        return Ok(LossReport::default());
    }
    let scale = 1.0 / episodes.len() as f64;
    let mut grad = params.zero_grad();
    let mut report = LossReport::default();
    for e in episodes {
        let (r, g) = episode_loss(params, &e.caches, &e.trace, &e.targets, weights, truncate)?;
        grad.add_scaled(&g, scale);
        report.add_scaled(&r, scale);
    }
    if !grad.is_finite() {
        return Err(Error::Contract("non-finite gradient".into()));
    }
    if let Some(limit) = max_grad_norm {
        let norm = grad.data.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > limit {
            grad.data.iter_mut().for_each(|g| *g *= limit / norm);
        }
    }
    adam_step(&mut params.data, &grad.data, opt)?;
    Ok(report)
}

/// Training state shared by the warm start and the main phase.
struct Run<'a> {
    train: &'a Dataset,
    val: &'a Dataset,
    actions: &'a BrowseActionSet,
    hp: &'a HyperParams,
    params: ModelParameters,
    opt: OptState,
    rho: f64,
}

impl Run<'_> {
    /// One pass over the training videos in shuffled batches.
    fn epoch(&mut self, phase: u64, epoch: usize, warm: bool) -> Result<(EpochRecord, Evaluation)> {
        let hp = self.hp;
        let weights = if warm { HyperParams::supervised_weights() } else { hp.weights() };
        let fixed = warm || hp.objective == Objective::Supervised;
        let target = hp.target_entropy(self.actions);
        let mut order: Vec<usize> = (0..self.train.videos.len()).collect();
        order.shuffle(&mut seed::rng(hp.seed, &[10, phase, epoch as u64]));

        let mut report = LossReport::default();
        let (mut map_sum, mut ent_sum, mut count) = (0.0, 0.0, 0usize);
        for batch in order.chunks(hp.batch_size) {
            let mut episodes = Vec::with_capacity(batch.len());
            let mut batch_entropy = 0.0;
            for &i in batch {
                let v = &self.train.videos[i];
                let mut policy = if fixed {
                    SpotterPolicy::with_fixed_browse(&self.params, self.actions.slowest())
                } else {
                    SpotterPolicy::new(&self.params)
                };
                let mut rng = seed::rng(hp.seed, &[11, phase, epoch as u64, i as u64]);
                let trace = rollout(
                    &mut policy,
                    &v.features,
                    Some(&v.annotation),
                    self.train.num_classes,
                    self.actions,
                    Mode::Train,
                    RolloutParams {
                        gamma: hp.gamma,
                        rho: self.rho,
                    },
                    &mut rng,
                )?;
                let targets = EpisodeTargets::new(
                    &trace,
                    &v.annotation,
                    self.train.num_classes,
                    v.features.chunk_span(),
                    hp.gamma,
                )?;
                map_sum += trace.final_map().unwrap_or(0.0);
                batch_entropy += trace.mean_entropy();
                episodes.push(Episode {
                    caches: policy.take_caches(),
                    trace,
                    targets,
                });
            }
            let r = combined_step(&mut self.params, &mut self.opt, &episodes, &weights, hp.bptt, hp.max_grad_norm)?;
            report.add_scaled(&r, batch.len() as f64);
            count += batch.len();
            ent_sum += batch_entropy;
            if !fixed && hp.objective == Objective::Reinforce {
                let h = batch_entropy / batch.len() as f64;
                self.rho = temperature_update(self.rho, h, target, hp.temperature_lr);
            }
        }
        let n = count.max(1) as f64;
        report.add_scaled(&report.clone(), 1.0 / n - 1.0);
        let val = self.validate()?;
        let record = EpochRecord {
            phase: if warm { "pretrain" } else { "train" }.into(),
            epoch,
            loss_cls: report.cls,
            loss_selector: report.selector,
            loss_critic: report.critic,
            surrogate: report.surrogate,
            loss_total: report.total,
            train_map: map_sum / n,
            val_map: val.report.map,
            val_skip_ratio: val.skip_ratio,
            mean_entropy: ent_sum / n,
            rho: self.rho,
        };
        Ok((record, val))
    }

    fn validate(&self) -> Result<Evaluation> {
        let mut policy = SpotterPolicy::new(&self.params);
        evaluate_policy(&mut policy, self.val, self.actions, self.hp.sigma)
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            hyper: self.hp.clone(),
            actions: self.actions.clone(),
            rho: self.rho,
            params: self.params.clone(),
            opt: Some(self.opt.clone()),
        }
    }
}

/// Outcome of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation mAP.
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub report: Vec<EpochRecord>,
    /// Validation predictions of the best parameters.
    pub val_predictions: PredictionSet,
    pub val_map: f64,
    pub val_skip_ratio: f64,
}

/// Supervised warm start of the classifier and selector with the browser
/// held at its smallest displacement. Returns one record per epoch.
pub fn pretrain(
    params: &mut ModelParameters,
    opt: &mut OptState,
    train: &Dataset,
    val: &Dataset,
    actions: &BrowseActionSet,
    hp: &HyperParams,
) -> Result<Vec<EpochRecord>> {
    let mut run = Run {
        train,
        val,
        actions,
        hp,
        params: params.clone(),
        opt: opt.clone(),
        rho: hp.rho,
    };
    let records = (1..=hp.pretrain_epochs)
        .map(|e| run.epoch(0, e, true).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    *params = run.params;
    *opt = run.opt;
    Ok(records)
}

/// Warm start, then the main phase with early stopping on validation mAP.
pub fn train(train: &Dataset, val: &Dataset, actions: &BrowseActionSet, hp: &HyperParams) -> Result<TrainOutcome> {
    hp.validate()?;
    train.validate()?;
    val.validate()?;
    if train.videos.is_empty() || val.videos.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    if train.feature_dim() != val.feature_dim() || train.num_classes != val.num_classes {
        return Err(Error::Config("training and validation sets disagree on shape".into()));
    }
    let params = ModelParameters::init(hp.shape(train, actions), hp.seed)?;
    let opt = OptState::new(params.len(), hp.lr);
    let mut run = Run {
        train,
        val,
        actions,
        hp,
        params,
        opt,
        rho: hp.rho,
    };

    let mut report = Vec::new();
    let initial = run.validate()?;
    let mut best = (run.checkpoint(), 0usize, initial);
    let phases = (1..=hp.pretrain_epochs)
        .map(|e| (true, e))
        .chain((1..=hp.epochs).map(|e| (false, e)));
    let mut stale = 0;
    for (step, (warm, e)) in phases.enumerate() {
        let (record, eval) = run.epoch(u64::from(!warm), e, warm)?;
        let improved = record.val_map > best.2.report.map;
        report.push(record);
        if improved {
            best = (run.checkpoint(), step + 1, eval);
            stale = 0;
        } else if !warm {
            stale += 1;
            if stale >= hp.patience {
                break;
            }
        }
    }
    let (ckpt, best_epoch, eval) = best;
    Ok(TrainOutcome {
        best: ckpt,
        best_epoch,
        report,
        val_predictions: eval.predictions,
        val_map: eval.report.map,
        val_skip_ratio: eval.skip_ratio,
    })
}

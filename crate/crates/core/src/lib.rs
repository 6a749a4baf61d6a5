//! Temporal action spotting with a reinforcement-learned frame browser.
//!
//! A recurrent agent walks through a video's feature sequence, deciding at
//! each visited frame whether to emit it as a spot (and with what class and
//! score) and how far to jump next. Training rewards the step-by-step
//! change in spotting mAP, so the summed discounted rewards telescope to
//! the discounted final mAP of the episode.
//!
//! Modules:
//!
//! * [`dataset`]: feature files, annotations, predictions, synthetic data.
//! * [`metric`]: spotting mAP and its incremental accumulator.
//! * [`env`]: the browsing episode, rewards, returns, skip ratio.
//! * [`nn`]: GRU memory, the four heads, gradients, Adam, checkpoints.
//! * [`trainer`]: losses, REINFORCE with a critic baseline, training loop.
//! * [`baselines`]: detector redraw, segmentation baselines, fixed policies.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod baselines;
pub mod dataset;
pub mod env;
pub mod error;
pub mod metric;
pub mod nn;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/metric.md")]
    mod metric {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
}

use rand::Rng;

use super::linalg::{argmax, log_sum_exp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Draw from the distribution.
    Sample,
    /// Take the most likely index.
    Greedy,
}

/// A categorical distribution parameterized by logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

/// Outcome of [`categorical`].
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub index: usize,
    pub log_prob: f64,
    pub entropy: f64,
    pub probs: Vec<f64>,
}

impl Categorical {
    pub fn new(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::Contract("empty logits".into()));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Contract(format!("non-finite logits {logits:?}")));
        }
        let lse = log_sum_exp(logits);
        let log_probs: Vec<f64> = logits.iter().map(|l| l - lse).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Ok(Self { probs, log_probs })
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p * l)
            .sum::<f64>()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.log_probs)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left `u` above the cumulative sum: take the last
        // index with non-zero mass.
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Gradient of `log p[index]` with respect to the logits.
    pub fn d_log_prob(&self, index: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs.iter().map(|p| -p).collect();
        g[index] += 1.0;
        g
    }

    /// Gradient of the cross-entropy `-log p[target]` with respect to the logits.
    pub fn d_cross_entropy(&self, target: usize) -> Vec<f64> {
        let mut g = self.probs.clone();
        g[target] -= 1.0;
        g
    }
}

pub fn categorical(logits: &[f64], sampling: Sampling, rng: &mut impl Rng) -> Result<Draw> {
    let dist = Categorical::new(logits)?;
    let index = match sampling {
        Sampling::Sample => dist.sample(rng),
        Sampling::Greedy => dist.argmax(),
    };
    Ok(Draw {
        index,
        log_prob: dist.log_probs[index],
        entropy: dist.entropy(),
        probs: dist.probs,
    })
}

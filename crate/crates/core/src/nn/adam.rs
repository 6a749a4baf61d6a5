use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moments and step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, descending along `grads`.
pub fn adam_step(params: &mut [f64], grads: &[f64], opt: &mut OptState) -> Result<()> {
    if params.len() != grads.len() || params.len() != opt.m.len() || opt.m.len() != opt.v.len() {
        return Err(Error::Contract(format!(
            "adam shapes differ: params {}, grads {}, moments {}/{}",
            params.len(),
            grads.len(),
            opt.m.len(),
            opt.v.len()
        )));
    }
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
        let m_hat = opt.m[i] / c1;
        let v_hat = opt.v[i] / c2;
        params[i] -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
    }
    Ok(())
}

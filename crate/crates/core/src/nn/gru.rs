use super::layout::{LayoutBuilder, Slot};
use super::linalg::{matvec_add, matvec_t_add, outer_add, sigmoid};
use super::{ModelParameters, StepCache};
use crate::error::{Error, Result};

/// Gate parameters: `W` reads the input, `U` the previous state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub w: Slot,
    pub u: Slot,
    pub b: Slot,
}

impl Gate {
    fn new(b: &mut LayoutBuilder, input: usize, hidden: usize) -> Self {
        Self {
            w: b.slot(hidden, input),
            u: b.slot(hidden, hidden),
            b: b.slot(hidden, 1),
        }
    }

    /// `b + W x + U h`.
    fn pre(&self, data: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut a = self.b.of(data).to_vec();
        matvec_add(self.w.of(data), self.w.cols, x, &mut a);
        matvec_add(self.u.of(data), self.u.cols, h, &mut a);
        a
    }

    /// Accumulates parameter gradients for pre-activation gradient `da`
    /// and adds `Uᵀ da` into `dh`.
    fn backward(&self, data: &[f64], grad: &mut [f64], x: &[f64], h: &[f64], da: &[f64], dh: &mut [f64]) {
        outer_add(self.w.of_mut(grad), self.w.cols, da, x);
        outer_add(self.u.of_mut(grad), self.u.cols, da, h);
        for (g, d) in self.b.of_mut(grad).iter_mut().zip(da) {
            *g += d;
        }
        matvec_t_add(self.u.of(data), self.u.cols, da, dh);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruLayout {
    pub update: Gate,
    pub reset: Gate,
    pub candidate: Gate,
}

impl GruLayout {
    pub fn new(b: &mut LayoutBuilder, input: usize, hidden: usize) -> Self {
        Self {
            update: Gate::new(b, input, hidden),
            reset: Gate::new(b, input, hidden),
            candidate: Gate::new(b, input, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.update.b.rows
    }

    /// Weight matrices, biases excluded.
    pub fn weights(&self) -> [Slot; 6] {
        [
            self.update.w,
            self.update.u,
            self.reset.w,
            self.reset.u,
            self.candidate.w,
            self.candidate.u,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCache {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub cand: Vec<f64>,
    /// `r ⊙ h_prev`.
    pub rh: Vec<f64>,
}

/// `h' = (1 - z) ⊙ h + z ⊙ h̃` with `h̃ = tanh(W f + U (r ⊙ h) + b)`.
pub fn gru_forward(params: &ModelParameters, f: &[f64], h: &[f64]) -> Result<(Vec<f64>, GruCache)> {
    let layout = params
        .layout
        .gru
        .as_ref()
        .ok_or_else(|| Error::Contract("model has no memory".into()))?;
    if f.len() != layout.update.w.cols || h.len() != layout.hidden() {
        return Err(Error::Contract(format!(
            "gru expects input {} and state {}, got {} and {}",
            layout.update.w.cols,
            layout.hidden(),
            f.len(),
            h.len()
        )));
    }
    let data = &params.data;
    let z: Vec<f64> = layout.update.pre(data, f, h).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = layout.reset.pre(data, f, h).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
    let cand: Vec<f64> = layout
        .candidate
        .pre(data, f, &rh)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let out = (0..h.len())
        .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
        .collect();
    Ok((out, GruCache { z, r, cand, rh }))
}

/// Accumulates GRU parameter gradients for `dh` (gradient at the new
/// state) and returns the gradient at the previous state.
pub fn gru_backward(
    layout: &GruLayout,
    data: &[f64],
    grad: &mut [f64],
    step: &StepCache,
    cache: &GruCache,
    dh: &[f64],
) -> Vec<f64> {
    let h = &step.prev;
    let f = &step.input;
    let n = h.len();
    let mut d_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - cache.z[i])).collect();

    let da_c: Vec<f64> = (0..n)
        .map(|i| dh[i] * cache.z[i] * (1.0 - cache.cand[i] * cache.cand[i]))
        .collect();
    let mut d_rh = vec![0.0; n];
    layout.candidate.backward(data, grad, f, &cache.rh, &da_c, &mut d_rh);
    for i in 0..n {
        d_prev[i] += d_rh[i] * cache.r[i];
    }

    let da_z: Vec<f64> = (0..n)
        .map(|i| dh[i] * (cache.cand[i] - h[i]) * cache.z[i] * (1.0 - cache.z[i]))
        .collect();
    layout.update.backward(data, grad, f, h, &da_z, &mut d_prev);

    let da_r: Vec<f64> = (0..n)
        .map(|i| d_rh[i] * h[i] * cache.r[i] * (1.0 - cache.r[i]))
        .collect();
    layout.reset.backward(data, grad, f, h, &da_r, &mut d_prev);
    d_prev
}

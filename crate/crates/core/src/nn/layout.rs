//! Parameter layout: every tensor of a model is a [`Slot`] in one flat
//! `f64` buffer, so optimizers, gradient checks and checkpoints work on a
//! single slice.

use super::linalg::{matvec_add, matvec_t_add, outer_add};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn of<'a>(&self, data: &'a [f64]) -> &'a [f64] {
        &data[self.range()]
    }

    pub fn of_mut<'a>(&self, data: &'a mut [f64]) -> &'a mut [f64] {
        &mut data[self.range()]
    }
}

#[derive(Debug, Default)]
pub struct LayoutBuilder {
    len: usize,
}

impl LayoutBuilder {
    pub fn slot(&mut self, rows: usize, cols: usize) -> Slot {
        let s = Slot {
            offset: self.len,
            rows,
            cols,
        };
        self.len += rows * cols;
        s
    }

    pub fn linear(&mut self, input: usize, output: usize) -> Linear {
        Linear {
            w: self.slot(output, input),
            b: self.slot(output, 1),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Affine map `y = W x + b` with `W` stored `output × input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: Slot,
    pub b: Slot,
}

impl Linear {
    pub fn input(&self) -> usize {
        self.w.cols
    }

    pub fn output(&self) -> usize {
        self.w.rows
    }
}

/// Stack of affine layers with rectifiers between them (and optionally
/// after the last one).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub relu_output: bool,
}

/// Post-activation values of every layer; the last entry is the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    pub activations: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn new(b: &mut LayoutBuilder, widths: &[usize], relu_output: bool) -> Self {
        let layers = widths.windows(2).map(|w| b.linear(w[0], w[1])).collect();
        Self {
            layers,
            relu_output,
        }
    }

    pub fn input(&self) -> usize {
        self.layers[0].input()
    }

    pub fn output(&self) -> usize {
        self.layers.last().unwrap().output()
    }

    fn rectified(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.relu_output
    }

    pub fn forward(&self, data: &[f64], x: &[f64]) -> MlpCache {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { activations[i - 1].as_slice() };
            let mut y = l.b.of(data).to_vec();
            matvec_add(l.w.of(data), l.input(), input, &mut y);
            if self.rectified(i) {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(y);
        }
        MlpCache { activations }
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(
        &self,
        data: &[f64],
        grad: &mut [f64],
        x: &[f64],
        cache: &MlpCache,
        d_out: &[f64],
    ) -> Vec<f64> {
        let mut delta = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            if self.rectified(i) {
                for (d, a) in delta.iter_mut().zip(&cache.activations[i]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = if i == 0 { x } else { cache.activations[i - 1].as_slice() };
            outer_add(l.w.of_mut(grad), l.input(), &delta, input);
            for (g, d) in l.b.of_mut(grad).iter_mut().zip(&delta) {
                *g += d;
            }
            let mut below = vec![0.0; l.input()];
            matvec_t_add(l.w.of(data), l.input(), &delta, &mut below);
            delta = below;
        }
        delta
    }
}

/// Glorot-uniform fill of a weight slot, times `scale`.
pub fn glorot(slot: &Slot, scale: f64, data: &mut [f64], rng: &mut impl rand::Rng) {
    let a = scale * (6.0 / (slot.rows + slot.cols) as f64).sqrt();
    for v in slot.of_mut(data) {
        *v = rng.random_range(-a..a);
    }
}

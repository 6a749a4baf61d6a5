//! The differentiable model: a GRU memory feeding four parallel heads.
//!
//! * selector (`SF`): 2 logits, drop / keep; the keep probability is the
//!   spot likelihood.
//! * classifier (`CL`): `C + 1` logits, background last.
//! * browser (`BROW`): one logit per allowed displacement.
//! * critic: a scalar value estimate.
//!
//! Each head is affine → ReLU → affine → ReLU → affine, the two hidden
//! layers as wide as the GRU state. Gradients are exact reverse mode with
//! backpropagation through time over the whole episode.

mod adam;
mod categorical;
mod checkpoint;
mod gradcheck;
mod gru;
pub mod layout;
pub mod linalg;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, OptState};
pub use categorical::{categorical, Categorical, Draw, Sampling};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{fd_check, FdReport};
pub use gru::{gru_backward, gru_forward, GruCache, GruLayout};
pub use layout::{glorot, LayoutBuilder, Linear, Mlp, MlpCache, Slot};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    Selector = 0,
    Classifier = 1,
    Browser = 2,
    Critic = 3,
}

impl Head {
    pub const ALL: [Head; 4] = [Head::Selector, Head::Classifier, Head::Browser, Head::Critic];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub num_classes: usize,
    pub num_actions: usize,
    /// Without memory the heads read the raw feature row directly.
    pub memory: bool,
}

impl ModelShape {
    pub fn head_outputs(&self, head: Head) -> usize {
        match head {
            Head::Selector => 2,
            Head::Classifier => self.num_classes + 1,
            Head::Browser => self.num_actions,
            Head::Critic => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.num_classes == 0 || self.num_actions == 0 {
            return Err(Error::Contract(format!("degenerate model shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayout {
    pub gru: Option<GruLayout>,
    pub heads: [Mlp; 4],
    pub len: usize,
}

impl ModelLayout {
    pub fn new(shape: &ModelShape) -> Self {
        let mut b = LayoutBuilder::default();
        let gru = shape
            .memory
            .then(|| GruLayout::new(&mut b, shape.input_dim, shape.hidden));
        let head_in = if shape.memory { shape.hidden } else { shape.input_dim };
        let heads = Head::ALL.map(|h| {
            Mlp::new(
                &mut b,
                &[head_in, shape.hidden, shape.hidden, shape.head_outputs(h)],
                false,
            )
        });
        Self {
            gru,
            heads,
            len: b.len(),
        }
    }
}

/// All learnable weights in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub shape: ModelShape,
    pub layout: ModelLayout,
    pub data: Vec<f64>,
}

/// Gradient buffer shaped like [`ModelParameters::data`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub data: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        linalg::axpy(scale, &other.data, &mut self.data);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|g| *g == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|g| g.is_finite())
    }
}

impl ModelParameters {
    pub fn zeros(shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        let layout = ModelLayout::new(&shape);
        Ok(Self {
            data: vec![0.0; layout.len],
            shape,
            layout,
        })
    }

    /// Glorot-uniform weights, zero biases. Output layers of the policy
    /// heads start scaled down so initial policies are close to uniform.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let mut rng = seed::rng(seed, &[0x1417]);
        let mut fill = |slot: &Slot, scale: f64, data: &mut [f64]| glorot(slot, scale, data, &mut rng);
        if let Some(g) = p.layout.gru.clone() {
            for s in g.weights() {
                fill(&s, 1.0, &mut p.data);
            }
        }
        for (i, head) in p.layout.heads.clone().iter().enumerate() {
            let n = head.layers.len();
            for (j, l) in head.layers.iter().enumerate() {
                let last = j + 1 == n;
                let scale = if last && i != Head::Critic as usize { 0.1 } else { 1.0 };
                fill(&l.w, scale, &mut p.data);
            }
        }
        Ok(p)
    }

    /// Uniform random values in `[-scale, scale]` everywhere, biases included.
    pub fn random(shape: ModelShape, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        for v in &mut p.data {
            *v = rng.random_range(-scale..scale);
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn head(&self, head: Head) -> &Mlp {
        &self.layout.heads[head as usize]
    }

    pub fn zero_grad(&self) -> GradientBundle {
        GradientBundle::zeros(self.data.len())
    }

    /// Width of the state vector the heads read.
    pub fn state_dim(&self) -> usize {
        if self.shape.memory {
            self.shape.hidden
        } else {
            self.shape.input_dim
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    pub fn head_forward(&self, head: Head, state: &[f64]) -> Result<MlpCache> {
        let mlp = self.head(head);
        if state.len() != mlp.input() {
            return Err(Error::Contract(format!(
                "head input has {} values, expected {}",
                state.len(),
                mlp.input()
            )));
        }
        Ok(mlp.forward(&self.data, state))
    }

    /// One time step: memory update then all four heads.
    pub fn forward_step(&self, features: &[f64], prev: &[f64]) -> Result<StepCache> {
        if features.len() != self.shape.input_dim {
            return Err(Error::Contract(format!(
                "feature row has {} values, model expects {}",
                features.len(),
                self.shape.input_dim
            )));
        }
        let (state, gru) = if self.shape.memory {
            let (h, cache) = gru_forward(self, features, prev)?;
            (h, Some(cache))
        } else {
            (features.to_vec(), None)
        };
        let heads = [
            self.head_forward(Head::Selector, &state)?,
            self.head_forward(Head::Classifier, &state)?,
            self.head_forward(Head::Browser, &state)?,
            self.head_forward(Head::Critic, &state)?,
        ];
        Ok(StepCache {
            input: features.to_vec(),
            prev: prev.to_vec(),
            gru,
            state,
            heads,
        })
    }
}

/// Intermediates of one forward step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub input: Vec<f64>,
    pub prev: Vec<f64>,
    pub gru: Option<GruCache>,
    pub state: Vec<f64>,
    pub heads: [MlpCache; 4],
}

impl StepCache {
    pub fn output(&self, head: Head) -> &[f64] {
        self.heads[head as usize].output()
    }

    pub fn value(&self) -> f64 {
        self.output(Head::Critic)[0]
    }
}

/// Loss gradients with respect to each head's outputs at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrads {
    pub heads: [Vec<f64>; 4],
}

impl OutputGrads {
    pub fn zeros(shape: &ModelShape) -> Self {
        Self {
            heads: Head::ALL.map(|h| vec![0.0; shape.head_outputs(h)]),
        }
    }

    pub fn head_mut(&mut self, head: Head) -> &mut Vec<f64> {
        &mut self.heads[head as usize]
    }
}

/// Reverse-mode gradients over an unrolled episode.
///
/// `truncate` limits how many steps gradients travel back through the
/// memory; `None` runs full backpropagation through time.
pub fn backward(
    params: &ModelParameters,
    caches: &[StepCache],
    grads: &[OutputGrads],
    truncate: Option<usize>,
) -> Result<GradientBundle> {
    if caches.len() != grads.len() {
        return Err(Error::Contract(format!(
            "{} step caches for {} output gradients",
            caches.len(),
            grads.len()
        )));
    }
    let mut out = params.zero_grad();
    let mut carry = vec![0.0; params.state_dim()];
    for n in (0..caches.len()).rev() {
        let cache = &caches[n];
        let mut d_state = std::mem::take(&mut carry);
        for head in Head::ALL {
            let d_out = &grads[n].heads[head as usize];
            if d_out.iter().all(|g| *g == 0.0) {
                continue;
            }
            let dx = params.head(head).backward(
                &params.data,
                &mut out.data,
                &cache.state,
                &cache.heads[head as usize],
                d_out,
            );
            linalg::axpy(1.0, &dx, &mut d_state);
        }
        carry = match (&params.layout.gru, &cache.gru) {
            (Some(layout), Some(g)) => {
                let cut = truncate.is_some_and(|k| k > 0 && (caches.len() - n) % k == 0);
                let d_prev = gru_backward(layout, &params.data, &mut out.data, cache, g, &d_state);
                if cut {
                    vec![0.0; d_prev.len()]
                } else {
                    d_prev
                }
            }
            (None, None) => vec![0.0; params.state_dim()],
            _ => return Err(Error::Contract("step cache does not match model memory".into())),
        };
    }
    Ok(out)
}

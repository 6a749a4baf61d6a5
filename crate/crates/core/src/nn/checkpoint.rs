//! Binary checkpoint: `ASCK`, version `u16`, a length-prefixed JSON header
//! (shape, action set, hyperparameters, temperature), then the flat
//! parameter vector and optionally the Adam state, all little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParameters, ModelShape, OptState};
use crate::env::BrowseActionSet;
use crate::error::{Error, Result};
use crate::trainer::HyperParams;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ASCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyper: HyperParams,
    pub actions: BrowseActionSet,
    /// Entropy temperature when the checkpoint was taken.
    pub rho: f64,
    pub params: ModelParameters,
    pub opt: Option<OptState>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    shape: ModelShape,
    actions: BrowseActionSet,
    hyper: HyperParams,
    rho: f64,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            shape: self.params.shape,
            actions: self.actions.clone(),
            hyper: self.hyper.clone(),
            rho: self.rho,
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.params.data.len() as u64).to_le_bytes());
        put_f64s(&mut out, &self.params.data);
        match &self.opt {
            None => out.push(0),
            Some(o) => {
                out.push(1);
                out.extend_from_slice(&o.step.to_le_bytes());
                put_f64s(&mut out, &[o.lr, o.beta1, o.beta2, o.eps]);
                put_f64s(&mut out, &o.m);
                put_f64s(&mut out, &o.v);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        let mut params = ModelParameters::zeros(header.shape)?;
        let n = r.u64()? as usize;
        if n != params.len() {
            return Err(Error::Checkpoint(format!(
                "{n} parameters stored, shape needs {}",
                params.len()
            )));
        }
        if header.actions.len() != header.shape.num_actions {
            return Err(Error::Checkpoint("action set does not match the browser head".into()));
        }
        params.data = r.f64s(n)?;
        let opt = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = r.u64()?;
                let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
                Some(OptState {
                    m: r.f64s(n)?,
                    v: r.f64s(n)?,
                    step,
                    lr,
                    beta1,
                    beta2,
                    eps,
                })
            }
            b => return Err(Error::Checkpoint(format!("bad optimizer flag {b}"))),
        };
        if r.at != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        if params.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self {
            hyper: header.hyper,
            actions: header.actions,
            rho: header.rho,
            params,
            opt,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

//! Binary feature files.
//!
//! Layout, all little-endian:
//!
//! | bytes | field                      |
//! |-------|----------------------------|
//! | 4     | magic `ASPT`               |
//! | 2     | version (`u16`, currently 1) |
//! | 4     | frames `T` (`u32`)         |
//! | 4     | dimension `D` (`u32`)      |
//! | 4     | chunk span (`u32`)         |
//! | 8·T·D | row-major `f64` payload    |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"ASPT";
pub const FEATURE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

/// Per-video matrix of `T` feature rows of dimension `D`.
///
/// Each row stands for one frame, or for one chunk of `chunk_span`
/// consecutive raw frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub video_id: String,
    frames: usize,
    dim: usize,
    chunk_span: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(
        video_id: impl Into<String>,
        dim: usize,
        chunk_span: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedHeader("feature dimension must be positive".into()));
        }
        if chunk_span == 0 {
            return Err(Error::MalformedHeader("chunk span must be positive".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::MalformedHeader(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self {
            video_id: video_id.into(),
            frames: data.len() / dim,
            dim,
            chunk_span,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chunk_span(&self) -> usize {
        self.chunk_span
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Raw frame index represented by row `index`: the (floor) center of its
    /// chunk, clamped to the last frame of a video with `num_frames` frames.
    pub fn frame_of_row(&self, index: usize, num_frames: usize) -> usize {
        let center = index * self.chunk_span + (self.chunk_span - 1) / 2;
        center.min(num_frames.saturating_sub(1))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.chunk_span as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(video_id: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedHeader(format!(
                "file is {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if &bytes[0..4] != FEATURE_MAGIC {
            return Err(Error::MalformedHeader("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FEATURE_VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {version}")));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (frames, dim, span) = (word(6), word(10), word(14));
        if frames == 0 || dim == 0 || span == 0 {
            return Err(Error::MalformedHeader(format!(
                "T={frames}, D={dim}, chunk_span={span}: all must be positive"
            )));
        }
        let expected = frames
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::MalformedHeader(format!(
                "{} trailing bytes after payload",
                payload.len() - expected
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(video_id, dim, span, data)
    }
}

/// Reads a feature file; the video id is the file stem.
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureSequence::from_bytes(id, &bytes)
}

pub fn write_feature_file(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, seq.to_bytes()).map_err(|e| Error::io(path, e))
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed feature header: {0}")]
    MalformedHeader(String),

    #[error("truncated feature payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid annotation for video {video:?}: {reason}")]
    Annotation { video: String, reason: String },

    #[error("invalid prediction on line {line}: {reason}")]
    Prediction { line: usize, reason: String },

    #[error("unknown video {0:?}")]
    UnknownVideo(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("reward unavailable: episode has no annotation")]
    RewardUnavailable,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of input data rather than by
    /// how the tool was invoked.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedHeader(_)
                | Error::TruncatedPayload { .. }
                | Error::NonFinite { .. }
                | Error::Annotation { .. }
                | Error::Prediction { .. }
                | Error::UnknownVideo(_)
                | Error::Json(_)
                | Error::OutOfRange { .. }
                | Error::Checkpoint(_)
        )
    }
}

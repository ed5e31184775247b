use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error(
        "truncation overflow at dim {dim}: discarded trace {:.3e} exceeds {max_tail:.1e}",
        1.0 - retained
    )]
    TruncationOverflow {
        dim: usize,
        retained: f64,
        max_tail: f64,
    },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("degenerate Cholesky factor (all entries zero)")]
    DegenerateFactor,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed file {}: {location}: {reason}", path.display())]
    MalformedFile {
        path: PathBuf,
        location: String,
        reason: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn malformed(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::MalformedFile {
            path: path.into(),
            location: location.into(),
            reason: reason.into(),
        }
    }
}

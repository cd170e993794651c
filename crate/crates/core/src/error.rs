use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, IcmenError>;

#[derive(Debug, Error)]
pub enum IcmenError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("node {0:?} has no row in the embedding")]
    MissingNode(NodeId),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("calibration system is singular; use a ridge constant > 0")]
    SingularCalibration,

    #[error("non-finite value during {0}")]
    NonFinite(String),

    #[error("negative sampling budget exhausted after {attempts} attempts ({found}/{wanted} pairs)")]
    SamplingExhausted {
        attempts: usize,
        found: usize,
        wanted: usize,
    },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("io error on {path:?}: {source}")]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for IcmenError {
    fn from(source: std::io::Error) -> Self {
        IcmenError::Io { path: None, source }
    }
}

impl IcmenError {
    pub(crate) fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IcmenError::Io {
            path: Some(path.into()),
            source,
        }
    }
}

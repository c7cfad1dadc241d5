use std::io;

use thiserror::Error;

/// Errors raised by the lab's library surface.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl LabError {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

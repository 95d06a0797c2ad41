//! Error type shared across the engine.

use crate::types::BranchKind;

/// Errors surfaced by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("branch mismatch: expected {expected:?}, got {got:?}")]
    BranchMismatch {
        expected: BranchKind,
        got: BranchKind,
    },

    /// A skip was executed without a cached velocity. This is a controller
    /// contract violation, not a recoverable condition.
    #[error("skip requested with no cached velocity for {0:?}")]
    SkipWithoutCache(BranchKind),

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

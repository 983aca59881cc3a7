use thiserror::Error;

use crate::factorization::{CombinationMode, HeadId};

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected} columns, got {got}")]
    InputShape { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("backward pass requested without a forward cache produced by this network")]
    MissingForwardCache,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("operation requires {expected:?} heads, but the set is configured for {actual:?}")]
    ModeMismatch {
        expected: CombinationMode,
        actual: CombinationMode,
    },

    #[error("head {0} is not part of this discriminator set")]
    UnknownHead(HeadId),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

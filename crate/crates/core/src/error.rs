use std::io;

use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent shapes, sizes, or hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Data that violates a structural invariant (missing agents, broken segments, ...).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// NaN/Inf detected in values or gradients.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Misuse of the differentiation tape.
    #[error("tape error: {0}")]
    Tape(String),

    /// Malformed checkpoint or log file.
    #[error("format error: {0}")]
    Format(String),

    #[error("invalid action {action} for agent {agent}")]
    InvalidAction { agent: usize, action: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FimError>;

#[derive(Debug, Error)]
pub enum FimError {
    /// Malformed input text. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A parameter or configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An argument refers to something that does not exist or violates an
    /// operation's input contract (unknown item, oversized oracle input, ...).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A driver loop ran more stages than its cap allows.
    #[error("iteration cap of {cap} stages exceeded")]
    IterationCap { cap: usize },

    /// Cross-checking two mining results found a disagreement.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl FimError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        FimError::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        FimError::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        FimError::Input(msg.into())
    }

    pub fn verification(msg: impl Into<String>) -> Self {
        FimError::Verification(msg.into())
    }
}

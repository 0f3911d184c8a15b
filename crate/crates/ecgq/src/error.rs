//! Error type shared across the crate.

use thiserror::Error;

/// Unified error for all library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A sample stream contained NaN or infinity at `index`.
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    /// Two grids or tensors that must agree in shape did not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A dataset or model contract was violated (e.g. noise-labeled items in
    /// a clean-only training set, or a missing prerequisite checkpoint).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration is internally inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input is degenerate for the requested statistic (e.g. zero pooled
    /// variance, empty distribution).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A binary or text artifact did not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// Training produced a non-finite gradient; names the offending tensor.
    #[error("non-finite gradient in parameter tensor '{tensor}'")]
    NonFiniteGrad { tensor: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for [`Error::InvalidArgument`] with formatted text.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

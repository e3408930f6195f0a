//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors surfaced by corpus loading, scoring, learning and the pipeline.
#[derive(Debug, Error)]
pub enum RelisError {
    /// Caller passed values that are out of range or inconsistent
    /// (empty candidate pool, mismatched lengths, invalid fractions ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// On-disk data does not follow the expected layout or syntax
    /// (missing docs/ directory, malformed sample line, bad model file ...).
    #[error("format error: {0}")]
    Format(String),

    /// A configuration value failed validation (non-positive budget,
    /// unknown loss name, dev fraction outside (0,1) ...).
    #[error("config error: {0}")]
    Config(String),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("logic error: {0}")]
    Logic(String),

    /// A requested exhaustive computation would exceed a hard cap
    /// (candidate-set enumeration past its size limit).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Underlying filesystem failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialisation failure when reading or writing artifacts.
    #[error("serialisation error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RelisError>;

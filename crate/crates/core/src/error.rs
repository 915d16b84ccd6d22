//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in an input file (wrong column count, bad header).
    #[error("format error: {0}")]
    Format(String),

    /// A field failed to parse as the expected type.
    #[error("parse error: {0}")]
    Parse(String),

    /// Label text outside the vigilance-state vocabulary.
    #[error("unknown label: {0}")]
    Label(String),

    /// Not enough samples/rows to perform the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Invalid configuration value.
    #[error("invalid config: {0}")]
    Config(String),

    /// Feature schemas of two artifacts do not match.
    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },

    /// Stratified splitting is impossible (e.g. unlabeled epochs).
    #[error("stratification error: {0}")]
    Stratification(String),

    /// A frequency band resolves to an empty set of spectral bins.
    #[error("band `{band}` resolves to no bins: {detail}")]
    BandResolution { band: String, detail: String },

    /// An optimizer produced a non-finite loss.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// Invalid numeric input (NaN/Inf features, off-simplex probabilities).
    #[error("invalid input: {0}")]
    Input(String),

    /// Serialized artifact carries an unsupported format version.
    #[error("unsupported format version `{found}`; supported: {supported}")]
    Version { found: String, supported: String },

    /// Model file lacks data required by the requested operation.
    #[error("missing capability: {0}")]
    Capability(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

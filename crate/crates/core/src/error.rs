use std::io;

use thiserror::Error;

/// Errors produced across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: usize, right: usize },

    #[error("polynomial is not invertible modulo X^{q}-1")]
    NonInvertible { q: usize },

    #[error("weight {weight} exceeds length {len}")]
    WeightTooLarge { weight: usize, len: usize },

    #[error("exponent {exponent} out of range for Q={q}")]
    ExponentOutOfRange { exponent: usize, q: usize },

    #[error("unknown ensemble `{0}`")]
    UnknownEnsemble(String),

    #[error("malformed shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("decoding failed after {iterations} iterations")]
    DecodingFailure { iterations: usize },

    #[error("key generation gave up after {attempts} attempts: {reason}")]
    KeyGeneration { attempts: usize, reason: String },

    #[error("malformed key file: {0}")]
    MalformedKey(String),

    #[error("key invariant violated: {0}")]
    InvariantViolation(String),

    #[error("unsupported key file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("threshold bracket failure: {0}")]
    Bracket(String),

    #[error("infeasible ISD parameters: {0}")]
    Infeasible(String),

    #[error("density evolution: {0}")]
    Density(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

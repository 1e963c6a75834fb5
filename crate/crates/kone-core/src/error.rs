//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KoneError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("duplicate atom position at index {0}")]
    DuplicatePosition(usize),
    #[error("position outside the window at index {0}")]
    OutsideWindow(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quadrature did not converge: {0}")]
    QuadratureFailed(String),
    #[error("weight density is not samplable: {0}")]
    NotSamplable(String),
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("observable support violation: {0}")]
    SupportViolation(String),
    #[error("pair potential fails condition (C2): margin {margin}")]
    C2Violation { margin: f64 },
    #[error("boundary condition has atoms inside the window (index {0})")]
    BoundaryInsideWindow(usize),
    #[error("non-finite energy encountered: {0}")]
    NonFiniteEnergy(String),
    #[error("energy cache drifted from recomputation: cached {cached}, fresh {fresh}")]
    EnergyCacheDrift { cached: f64, fresh: f64 },
    #[error("non-finite state at step {step}: {detail}")]
    NonFiniteState { step: u64, detail: String },
    #[error("diffusion requires spatial dimension >= 2 (got {0}); enable allow_dim1 only in tests")]
    DimensionTooLow(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error ({location}): {message}")]
    Config { location: String, message: String },
    #[error("unknown check name: {0}")]
    UnknownCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KoneError>;

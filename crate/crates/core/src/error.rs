use thiserror::Error;

#[derive(Debug, Error)]
pub enum MspError {
    #[error("jump law is not normalized: intensity * E[Y^2] = {0}, expected 1")]
    Normalization(f64),
    #[error("noise variance {kappa} exceeds family bound {bound}")]
    FamilyBound { kappa: f64, bound: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("grid mismatch: expected {expected} points, got {actual}")]
    GridMismatch { expected: usize, actual: usize },
    #[error("epsilon {0} outside the admissible domain (0, 1/sqrt(3)]")]
    Domain(f64),
    #[error("delta {0} outside (0, 1/6)")]
    DeltaRange(f64),
    #[error("index {index} outside 1..={max}")]
    Range { index: usize, max: usize },
    #[error("signal has zero empirical norm")]
    ZeroSignal,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MspError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MspError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, MspError>;

use thiserror::Error;

use crate::quaternionic::State;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64, last: Box<State> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no general frame found after {attempts} attempts")]
    DegenerateFrames { attempts: usize },

    #[error("perfection violated: coefficient {coefficient} at degree {degree}")]
    PerfectionViolation { degree: usize, coefficient: i64 },

    #[error("residuals too large to trust: {0}")]
    Untrusted(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("sampling failed: {0}")]
    Sampling(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error types for the toolkit.

use thiserror::Error;

/// Errors surfaced by toolkit operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate factor label `{0}`")]
    DuplicateLabel(String),

    #[error("factor mismatch: {0}")]
    FactorMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {what} (residual {residual:.3e})")]
    InvalidState { what: String, residual: f64 },

    #[error("invalid isometry: {what} (residual {residual:.3e})")]
    InvalidIsometry { what: String, residual: f64 },

    #[error("alpha = {alpha} out of range: {requirement}")]
    InvalidAlpha { alpha: f64, requirement: &'static str },

    #[error("beta = {beta} out of range: requires 1/2 < beta < 1")]
    InvalidBeta { beta: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("dimension budget exceeded: {what} needs {needed}, budget {budget}")]
    BudgetExceeded {
        what: String,
        needed: usize,
        budget: usize,
    },

    #[error(
        "Koashi-Imoto refinement did not converge after {rounds} rounds \
         (best residual {residual:.3e})"
    )]
    KiNonConvergence { rounds: usize, residual: f64 },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

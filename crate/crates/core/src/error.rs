//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is rank deficient: {context}")]
    RankDeficient { context: String },

    #[error("matrix is not positive definite: {context}")]
    NotPositiveDefinite { context: String },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("residual vanishes at row {row}: |s_{row}| = {value:e} < tol {tol:e}")]
    ZeroResidualRow { row: usize, value: f64, tol: f64 },

    #[error("instance generation failed: {context}")]
    GenerationFailed { context: String },

    #[error("parse error in {field}: {context}")]
    ParseError { field: String, context: String },

    #[error("column index {index} out of range (d = {dim})")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("non-positive sampling weight at row {row}: {value:e}")]
    NonPositiveWeight { row: usize, value: f64 },

    #[error("bound hypothesis violated: {which}")]
    HypothesisViolated { which: String },

    #[error("finite-difference probe left the feasible region: {context}")]
    ProbeInfeasible { context: String },

    #[error("Hessian solve failed: {context}")]
    HessianFailure { context: String },

    #[error("argument out of range: {context}")]
    BadRange { context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::envelope::EnvelopeResult;

/// Errors raised by the measure, transport, envelope and functional routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {left} atoms vs {right} atoms")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NonSpd { min_eigenvalue: f64 },

    #[error("map is not monotone: {0}")]
    NonMonotoneMap(String),

    #[error("instance too large for exhaustive search: {size} > {max}")]
    TooLarge { size: usize, max: usize },

    #[error("exact solver stalled after {iterations} pivots (dual violation {violation:e})")]
    SolverStall { iterations: usize, violation: f64 },

    #[error("delta must lie in [1e-6, 1 - 1e-6], got {0}")]
    BadDelta(f64),

    #[error("envelope iteration did not converge (gap {:e} after {} iterations)", .0.gap, .0.iterations)]
    NoConvergence(Box<EnvelopeResult>),

    #[error("degenerate transport: assignment gap {0:e} below threshold")]
    Degenerate(f64),

    #[error("grid value h = {h} leaves the admissible band |h|·‖A‖ < 1/2 (‖A‖ = {operator_norm})")]
    GridOutOfBand { h: f64, operator_norm: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

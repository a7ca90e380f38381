use thiserror::Error;

use crate::grid::Grid;
use crate::tv::SolverTrace;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible grids: {left} vs {right}")]
    IncompatibleGrids { left: Grid, right: Grid },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("kernel not supported by the tube solver: {0}")]
    UnsupportedKernel(String),

    #[error("solver failure: {message}")]
    SolverFailure {
        message: String,
        trace: Box<SolverTrace>,
    },

    #[error("no feasible extension: prefix leaves the tube at boundary {index}")]
    Infeasible { index: usize },

    #[error("numeric failure: {message} (achieved error estimate {achieved:e})")]
    NumericFailure { message: String, achieved: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("kernel width sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("regularization lambda must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has {points} points but {derivatives} derivatives")]
    LengthMismatch { points: usize, derivatives: usize },

    #[error("linear solve failed: {diagnostic}")]
    SolveFailure { diagnostic: String },

    #[error(
        "representer residual check failed at sample {index}: residual {residual:e} exceeds bound {bound:e}"
    )]
    ResidualCheck {
        index: usize,
        residual: f64,
        bound: f64,
    },

    #[error("non-finite state encountered at integration step {step}")]
    NonFiniteState { step: usize },

    #[error("operation `{operation}` requires a symplectic-family kernel, model uses {family}")]
    NotSymplectic {
        operation: &'static str,
        family: String,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cannot split {samples} samples into {folds} folds")]
    TooManyFolds { folds: usize, samples: usize },

    #[error("training failed on fold {fold}: {source}")]
    FoldTraining {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

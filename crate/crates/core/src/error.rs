use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A covariance matrix could not be factorized.
    #[error("conditioning failure: {matrix} is not positive definite")]
    Conditioning { matrix: String },

    /// Incomplete Cholesky met a pivot below the allowed negative tolerance.
    #[error("kernel is not positive semidefinite: pivot {pivot} has residual {residual:e}")]
    NotPsd { pivot: usize, residual: f64 },

    #[error("worker {worker}: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<GpError>,
    },

    #[error("unknown worker id {0}")]
    UnknownWorker(usize),

    #[error("unknown phase {0:?}")]
    UnknownPhase(String),

    #[error("nonpositive predictive variance at {count} test inputs (most negative {min:e})")]
    NonpositiveVariance { count: usize, min: f64 },

    #[error("infeasible size: {0}")]
    Infeasible(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GpError {
    pub(crate) fn conditioning(matrix: impl Into<String>) -> Self {
        GpError::Conditioning {
            matrix: matrix.into(),
        }
    }

    pub(crate) fn in_worker(self, worker: usize) -> Self {
        match self {
            already @ GpError::Worker { .. } => already,
            other => GpError::Worker {
                worker,
                source: Box::new(other),
            },
        }
    }

    /// True for failures caused by ill-conditioned or indefinite matrices.
    pub fn is_conditioning(&self) -> bool {
        match self {
            GpError::Conditioning { .. } | GpError::NotPsd { .. } => true,
            GpError::Worker { source, .. } => source.is_conditioning(),
            _ => false,
        }
    }
}

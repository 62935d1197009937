use ndarray::Array2;
use thiserror::Error;

use crate::em::EmTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("simplex violation: {0}")]
    Simplex(String),

    #[error("column-stochastic violation: {0}")]
    ColumnStochastic(String),

    #[error("anchoring violation: {0}")]
    Anchoring(String),

    #[error("noisy class {0} has zero marginal probability")]
    DegenerateNoisyClass(usize),

    #[error("class {0} has zero proportion; posterior intercept is undefined")]
    ZeroClassProportion(usize),

    #[error("sample {0} has zero mass under every latent class")]
    DegenerateResponsibility(usize),

    #[error("latent class {0} is empty (mean responsibility {1:e})")]
    EmptyLatentClass(usize, f64),

    #[error("constrained transition update is singular for class {0} (lower bound 1 is active)")]
    SingularConstraint(usize),

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last: Box<Array2<f64>>,
    },

    #[error("all {restarts} EM restarts failed; last error: {last_error}")]
    AllRestartsFailed {
        restarts: usize,
        last_error: String,
        best_trace: Option<Box<EmTrace>>,
    },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

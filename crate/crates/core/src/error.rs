use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alpha = 1 is out of scope")]
    AlphaOneOutOfScope,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("attempt budget of {budget} exceeded: {context}")]
    BudgetExceeded { budget: u64, context: String },

    #[error("population overflow at generation {generation}: {count} particles exceed the limit of {limit}")]
    Overflow {
        generation: usize,
        count: usize,
        limit: usize,
    },

    #[error("calibration did not converge after {iterations} iterations: {trace}")]
    Calibration { iterations: usize, trace: String },

    #[error("no admissible boundary-case root: {0}")]
    Infeasible(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("fit quality too poor: residual {residual:.3e} above threshold {threshold:.3e}")]
    FitQuality { residual: f64, threshold: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

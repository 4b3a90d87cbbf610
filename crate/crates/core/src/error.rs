use thiserror::Error;

/// Errors raised by model construction, numerical routines and validation.
#[derive(Debug, Error)]
pub enum NpcError {
    #[error("point {point:?} is outside the interior of the {domain} domain")]
    OutsideDomain { point: Vec<f64>, domain: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("penalization must be positive, found {value} at {point:?}")]
    NonPositivePenalty { value: f64, point: Vec<f64> },

    #[error("lower bound violated: varsigma^2 = {value} < {lower_bound} at {point:?}")]
    LowerBoundViolated {
        value: f64,
        lower_bound: f64,
        point: Vec<f64>,
    },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("non-finite state produced at step {step}")]
    NonFiniteState { step: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("function lies outside the admissible subspace: {0}")]
    Inadmissible(String),

    #[error("degenerate regressor (variance {0:e})")]
    DegenerateRegressor(f64),
}

pub type Result<T> = std::result::Result<T, NpcError>;

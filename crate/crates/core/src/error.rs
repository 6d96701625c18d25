use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },
    #[error("eliminated block is singular")]
    SingularBlock,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("condition does not hold at any admissible rate")]
    InfeasibleAtAllRates,
    #[error("re-check failed after transform (margin {0:e})")]
    ReCheckFailed(f64),
    #[error("P is singular")]
    SingularP,
    #[error("alpha(W) = {0} is outside (-inf, 0) U (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("no real root for eigenvalue {0}")]
    NoRealRoot(f64),
    #[error("V is rank deficient (sigma_min = {0:e})")]
    RankDeficientV(f64),
    #[error("recovered slope factor has norm {0} > 1")]
    SlopeBoundViolated(f64),
    #[error("rate c = 1 cannot be inverted")]
    DegenerateRate,
    #[error("no certificate found (best margin {0:e})")]
    NotFound(f64),
    #[error("A = I - W is singular")]
    SingularA,
    #[error("state became non-finite at step {0}")]
    NonFiniteState(usize),
    #[error("fixed-point iteration did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("traces are degenerate: {0}")]
    DegenerateTraces(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use crate::matcore::{LinalgError, C64};

/// Errors raised by the structured-node routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("leading block matrix of order {order} is not positive definite")]
    NotPositiveDefiniteAt { order: usize },
    #[error("transfer factor has a pole at lambda = {0}")]
    PoleAtLambda(C64),
    #[error("frame prefactor has a pole at z = {0}")]
    PoleAtZ(C64),
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("coefficient is not a strict contraction (spectral norm {norm:.6})")]
    NotContractive { norm: f64 },
    #[error("evaluation failed: {0}")]
    EvaluationFailure(String),
    #[error("linear-fractional denominator is singular at z = {0}")]
    SingularDenominator(C64),
    #[error("resolvent is singular at z = {0}")]
    SingularResolvent(C64),
    #[error("point {0} is not in the open upper half-plane")]
    NotInUpperHalfPlane(C64),
    #[error("invalid parameter pair: {0}")]
    InvalidPair(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("quadrature not converged (doubled-node difference {difference:.3e}, tolerance {tolerance:.3e})")]
    QuadratureNotConverged { difference: f64, tolerance: f64 },
    #[error("Laurent extraction not converged (radius drift {drift:.3e})")]
    ExtractionNotConverged { drift: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("Szego condition violated: log-determinant integral diverges to -infinity")]
    SzegoViolated,
    #[error("outer factor denominator F(z) is singular at z = {0}")]
    SingularF(C64),
    #[error("resolvent singular on sampling grid at z = {0}")]
    SingularOnGrid(C64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

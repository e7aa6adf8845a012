use thiserror::Error;

/// Errors raised by the measure, phase, spectrum and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature scheme `{scheme}` cannot integrate a {measure} measure")]
    SchemeMismatch {
        scheme: &'static str,
        measure: &'static str,
    },

    #[error("non-finite integrand value at node {node:?}")]
    NonFiniteValue { node: Vec<f64> },

    #[error("point {point:?} outside the domain of {map}")]
    DomainViolation { map: &'static str, point: Vec<f64> },

    #[error("{map} is not differentiable")]
    NotDifferentiable { map: &'static str },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("matrices A_{i} and A_{j} do not commute (residual {residual:e})")]
    NonCommuting { i: usize, j: usize, residual: f64 },

    #[error("matrix exponential overflowed")]
    Overflow,

    #[error("quadrature did not reach tolerance {tol:e} (estimate {err:e})")]
    QuadratureFailure { tol: f64, err: f64 },

    #[error("singular value iteration did not converge after {sweeps} sweeps")]
    SvdNonConvergence { sweeps: usize },

    #[error("self-similar product formula failed validation: deviation {deviation:e} at xi={xi}")]
    ProductFormulaRejected { xi: f64, deviation: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("window exceeds the enumerated range of the spectrum")]
    WindowOutOfRange,

    #[error("test basis is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("too many inversion failures ({failed} of {total})")]
    InversionFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

use thiserror::Error;

/// Failures raised by the numerical kernel and the solvers built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value encountered: {context}")]
    Numerical { context: String },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular jacobian (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("hamiltonian has side {got:?}, operation requires {expected:?}")]
    SideMismatch {
        expected: crate::mechanics::Side,
        got: crate::mechanics::Side,
    },

    #[error("negative discriminant {discriminant:e} in quadratic root")]
    Branch { discriminant: f64 },

    #[error("degenerate grid at index {index}: zero spacing in difference quotient")]
    DegenerateGrid { index: usize },

    #[error("singular denominator {denominator:e} in closed-form recurrence")]
    SingularDenominator { denominator: f64 },

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short machine-readable tag, used in CSV headers and check reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numerical { .. } => "NumericalError",
            Error::Convergence { .. } => "ConvergenceError",
            Error::SingularJacobian { .. } => "SingularJacobianError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SideMismatch { .. } => "SideMismatch",
            Error::Branch { .. } => "BranchError",
            Error::DegenerateGrid { .. } => "DegenerateGridError",
            Error::SingularDenominator { .. } => "SingularDenominatorError",
            Error::UnknownModel(_) => "UnknownModel",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

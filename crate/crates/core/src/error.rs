use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: the operator family requires N >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square or has inconsistent rows")]
    NotSquare,

    #[error("matrix is not unimodular (determinant {0})")]
    NotUnimodular(String),

    #[error("QR iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("C-condition violated: eigenvalue on the unit circle within tolerance")]
    NotCSystem,

    #[error("numerical degeneracy: eigenvector residual {residual:.3e} exceeds tolerance")]
    Degenerate { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too few usable points for a decay fit: {0} (need at least 3)")]
    TooFewPoints(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSquare => "not_square",
            Error::NotUnimodular(_) => "not_unimodular",
            Error::NoConvergence(_) => "no_convergence",
            Error::NotCSystem => "not_c_system",
            Error::Degenerate { .. } => "numerical_degeneracy",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::TooFewPoints(_) => "too_few_points",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

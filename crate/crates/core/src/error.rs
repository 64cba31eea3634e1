use thiserror::Error;

/// Errors raised by the envelope machinery, the solver and the generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FbseError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigendecomposition failed for a matrix of Frobenius norm {norm:e}")]
    EigenFailure { norm: f64 },

    #[error("point is not in the set (distance {distance:e})")]
    NotInSet { distance: f64 },

    #[error(
        "constraint Jacobian is rank deficient (singular values {sigma_min:e} / {sigma_max:e})"
    )]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("cannot project the zero point onto the sphere")]
    ZeroPoint,

    #[error("feasibility restoration did not converge (residual {residual:e})")]
    RestorationFailure { residual: f64 },

    #[error("envelope system is singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularEnvelope { min_eigenvalue: f64 },

    #[error("constraint callback failed: {0}")]
    Callback(String),

    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, FbseError>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FbseError::DimensionMismatch { expected, got })
    }
}

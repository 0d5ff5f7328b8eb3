use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A value violates a documented precondition. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// Floquet truncation did not reach the requested tolerance before the harmonic cap.
    #[error(
        "Floquet truncation not converged: change {change:.3e} at {harmonics} harmonics exceeds {tolerance:.1e}"
    )]
    NonConvergence {
        harmonics: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("Hermitian eigensolver did not converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    /// Halving the integration step changed the result by more than the tolerance.
    #[error("integration not resolved: step halving changed populations by {change:.3e} (tolerance {tolerance:.1e})")]
    Integration { change: f64, tolerance: f64 },

    /// Single-exponential fit rejected because its coefficient of determination is too low.
    #[error("poor exponential fit: R^2 = {r_squared:.4} (tau = {tau:.4e} us)")]
    PoorFit { tau: f64, r_squared: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }
}

/// Returns `Err` unless `value` is finite and strictly positive.
pub(crate) fn require_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, alloc::format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_finite(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, alloc::format!("must be finite, got {value}")))
    }
}

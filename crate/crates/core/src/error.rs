use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hilbert-space dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix `{label}` is not Hermitian (max |M - M^H| = {residual:e})")]
    NotHermitian { label: String, residual: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("step size dt = {dt} violates dt * max|E_ab| < {limit} (max|E_ab| = {max_freq})")]
    StepSize { dt: f64, max_freq: f64, limit: f64 },

    #[error("empty band: {0}")]
    EmptyBand(String),

    #[error("molecule {index}: {source}")]
    Molecule {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {value}")))
    }
}

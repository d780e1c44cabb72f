use thiserror::Error;

/// Errors raised by the simulation and estimation kernels.
#[derive(Debug, Error)]
pub enum LppError {
    /// An input violates a documented precondition. Raised before any computation.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The sampling grid cannot represent the requested computation.
    #[error("sampling violation: {message} (need at least {required} pixels per axis)")]
    Sampling { message: String, required: usize },

    /// Two grids that must agree in shape or spacing do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A closed-form expression was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The detector model has no preimage for the given counts.
    #[error("detector saturated: detected counts × theta = {product} ≥ 1")]
    Saturation { product: f64 },

    /// A feature could not be found in the data.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// An iterative fit did not produce a valid result.
    #[error("fit failed: {message}; {diagnostics}")]
    Fit { message: String, diagnostics: String },
}

impl LppError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        LppError::Validation(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        LppError::Estimation(msg.into())
    }

    /// True for errors detected before any computation started.
    pub fn is_validation(&self) -> bool {
        matches!(self, LppError::Validation(_) | LppError::Sampling { .. } | LppError::GridMismatch(_))
    }
}

pub type Result<T, E = LppError> = std::result::Result<T, E>;

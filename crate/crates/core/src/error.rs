use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {what} at node {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("field does not match grid: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("amplitude collapse: min(s + tau) = {min_amplitude:.3e} <= {threshold:.3e}")]
    AmplitudeCollapse { min_amplitude: f64, threshold: f64 },

    #[error("degenerate inhomogeneity: no leading-order phase selection (|G| = {0:.3e})")]
    DegenerateInhomogeneity(f64),

    #[error("annulus [{r0}, {r1}] is invalid: {reason}")]
    InvalidAnnulus { r0: f64, r1: f64, reason: String },

    #[error("test field support is within {margin} of the boundary")]
    SupportViolation { margin: f64 },

    #[error("singular bordered Jacobian (condition estimate {condition:.3e})")]
    SingularJacobian { condition: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("evolution blew up at t = {time}: max|A| = {max_abs:.3e}")]
    BlowUp { time: f64, max_abs: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GlError> = std::result::Result<T, E>;

impl GlError {
    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        GlError::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

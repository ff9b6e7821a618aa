use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("field does not decay at the domain edge: |f(x_min)| = {edge:e} exceeds {limit:e}")]
    BoundaryLeak { edge: f64, limit: f64 },

    #[error("norm drifted to {norm} at time index {t_index}")]
    NormDrift { t_index: usize, norm: f64 },

    #[error("node detected: |psi|^2 = {density:e} at (t_index {t_index}, x_index {x_index})")]
    NodeDetected {
        t_index: usize,
        x_index: usize,
        density: f64,
    },

    #[error("phase unwrap inconsistent at (t_index {t_index}, x_index {x_index}): step {step}")]
    UnwrapInconsistent {
        t_index: usize,
        x_index: usize,
        step: f64,
    },

    #[error("density is not a probability density: {0}")]
    InvalidDensity(String),

    #[error("trajectory {path} left the domain at t = {time}: position {position}")]
    Diverged {
        path: usize,
        time: f64,
        position: f64,
    },

    #[error("perturbation amplitude infeasible: {0}")]
    AmplitudeInfeasible(String),

    #[error("velocity correction leaks outside the perturbation support: |u| = {leak:e} vs max {max:e}")]
    SupportLeak { leak: f64, max: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

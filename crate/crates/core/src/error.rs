use thiserror::Error;

/// Errors raised by chimera-core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("integration exceeded {max_steps} steps at t = {t}")]
    MaxSteps { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSize { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("tangent vector collapsed at t = {t} (norm {norm:e})")]
    TangentCollapse { t: f64, norm: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::MaxSteps { .. }
                | Error::StepSize { .. }
                | Error::NonFinite { .. }
                | Error::TangentCollapse { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor space: {0}")]
    InvalidSpace(String),

    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },

    #[error("ancilla level {level} out of range for ancilla_dim = {dim}")]
    LevelOutOfRange { level: usize, dim: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("jump `{0}` annihilates the state (zero norm after jump)")]
    ZeroNorm(String),

    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("operator `{label}` is not unitary on its support (deviation {deviation:e})")]
    NonUnitary { label: String, deviation: f64 },

    #[error("non-physical result: {0}")]
    NonPhysical(String),

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. } | Error::NonPhysical(_) | Error::FitFailed(_)
        )
    }
}

/// Non-fatal warning attached to a result.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into() }
    }
}

/// A value together with any diagnostics raised while computing it.
#[derive(Clone, Debug)]
pub struct Checked<T> {
    pub value: T,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Self { value, diagnostics: Vec::new() }
    }

    pub fn into_value(self) -> T {
        self.value
    }
}

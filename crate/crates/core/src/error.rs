use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("iterative solve for {problem} stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        problem: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("incompatible Neumann data: defect {defect:.3e} exceeds {tolerance:.3e}")]
    CompatibilityViolation { defect: f64, tolerance: f64 },

    #[error("pinning landscape violates 0 < inf b: {0}")]
    InvalidLandscape(String),

    #[error("step rejected at t = {t}: max |u| = {max_modulus}")]
    StepRejected { t: f64, max_modulus: f64 },

    #[error("invalid vortex placement: {0}")]
    PlacementError(String),

    #[error("position ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("confinement verdicts are not a single transition: {verdicts:?}")]
    NonMonotoneVerdicts {
        lambdas: Vec<f64>,
        verdicts: Vec<bool>,
    },

    #[error("vortex count mismatch: {0}")]
    CountMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error in `{field}`: {message}")]
    ConfigError { field: String, message: String },

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name, used in machine-readable error reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::CompatibilityViolation { .. } => "CompatibilityViolation",
            Error::InvalidLandscape(_) => "InvalidLandscape",
            Error::StepRejected { .. } => "StepRejected",
            Error::PlacementError(_) => "PlacementError",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::NonMonotoneVerdicts { .. } => "NonMonotoneVerdicts",
            Error::CountMismatch(_) => "CountMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::ConfigError { .. } => "ConfigError",
            Error::Format(_) => "FormatError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

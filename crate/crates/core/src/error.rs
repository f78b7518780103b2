use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("order violation: {0}")]
    OrderViolation(String),

    #[error("tangency point must lie beyond the last spike: {0}")]
    TangencyOrderViolation(String),

    #[error("Hopf frequency collapsed to zero (captured the translational root)")]
    ZeroFrequencyCollapse,

    #[error("corrector failed at minimum step near beta = {beta}")]
    CorrectorFailure { beta: f64 },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("insufficient events: {0}")]
    InsufficientEvents(String),

    #[error("quadrature tolerance not met: {0}")]
    Quadrature(String),

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure classes, as reported by the command-line exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Numerical,
    Validation,
    Config,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Self::Stage { source, .. } => source.class(),
            Self::Validation(_) | Self::InvalidParams(_) | Self::OrderViolation(_) | Self::TangencyOrderViolation(_) => ErrorClass::Validation,
            Self::Config(_) | Self::Io(_) | Self::Json(_) | Self::Csv(_) => ErrorClass::Config,
            _ => ErrorClass::Numerical,
        }
    }
}

/// Names the stage a failure happened in.
pub trait StageExt<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| Error::Stage { stage: stage.into(), source: Box::new(e) })
    }
}

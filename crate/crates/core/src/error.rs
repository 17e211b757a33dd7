use thiserror::Error;

/// Errors raised by the estimation, sampling and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("optimizer did not converge (best log-likelihood {best_loglik}, params {best:?})")]
    NonConvergence { best: [f64; 3], best_loglik: f64 },

    #[error("information not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate sensitivity: quantile derivative vanishes")]
    DegenerateSensitivity,

    #[error("level too extreme for block size")]
    LevelTooExtreme,

    #[error("sampler stuck: {0} consecutive adaptation windows without an accepted proposal")]
    SamplerStuck(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable reason code used by the experiment harness.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::SeriesTooShort { .. } => "series_too_short",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::DegenerateSensitivity => "degenerate_sensitivity",
            Error::LevelTooExtreme => "level_too_extreme",
            Error::SamplerStuck(_) => "sampler_stuck",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

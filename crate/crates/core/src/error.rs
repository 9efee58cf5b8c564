use thiserror::Error;

/// Errors surfaced by the fitting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains no valid event records")]
    EmptyInput,

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid smoothing window: window={window}, step={step}")]
    InvalidWindow { window: f64, step: f64 },

    #[error("series for '{0}' is zero everywhere")]
    AllZero(String),

    #[error("integration failed at t={t} ({reason}); params {params}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        params: String,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("chain too short for summary: {len} samples (need at least {min})")]
    ChainTooShort { len: usize, min: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Bayesian parameter estimation for one occurrence under one model.

pub mod ensemble;
pub mod fit;
pub mod init;
pub mod summary;

pub use ensemble::{Chain, Ensemble, LogDensity, StretchSampler};
pub use fit::{
    fit, log_posterior, read_summary_csv, write_summary_csv, Diagnostics, FitConfig, FitResult, Posterior, PriorBox,
    SummaryRow,
};
pub use init::InitStrategy;
pub use summary::{summarize, ChainSummary, Interval};

//! Epidemic-model fitting for hashtag activity.
//!
//! The pipeline turns timestamped hashtag events into a smoothed activity
//! series, cuts out the burst around its peak, and samples the posterior of an
//! SIR or SIRI model fitted to that burst with an affine-invariant ensemble
//! sampler. Corpus-level tables summarize the fitted reproduction numbers.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod inference;
pub mod ingest;
pub mod ode;
pub mod pipeline;
pub mod series;
pub mod synth;

pub use dynamics::{integrate, reproduction_number, ModelKind, ParamVector, Trajectory};
pub use error::{Error, Result};
pub use inference::{fit, FitConfig, FitResult, PriorBox, SummaryRow};
pub use ingest::{EventRecord, EventSeries, InputFormat};
pub use series::{extract_occurrence, smooth, IntensitySeries, Occurrence};

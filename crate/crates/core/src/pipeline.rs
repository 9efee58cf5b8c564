//! Corpus-wide fitting: every (hashtag, location) series under every
//! requested model, on a bounded worker pool.
//!
//! Each fit draws from its own rng stream, seeded from the global seed and
//! the fit's identity, so results do not depend on scheduling or on the
//! number of workers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dynamics::ModelKind;
use crate::error::{Error, Result};
use crate::inference::{fit, FitResult, SummaryRow};
use crate::ingest::EventSeries;
use crate::series::{extract_occurrence, smooth, DEFAULT_FRACTION, DEFAULT_STEP, DEFAULT_WINDOW};

/// Smoothing and extraction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSettings {
    pub window: f64,
    pub step: f64,
    pub fraction: f64,
}

impl Default for SeriesSettings {
    fn default() -> Self {
        SeriesSettings {
            window: DEFAULT_WINDOW,
            step: DEFAULT_STEP,
            fraction: DEFAULT_FRACTION,
        }
    }
}

/// A (hashtag, location, model) combination that produced no fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub hashtag: String,
    pub location: String,
    pub model: ModelKind,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CorpusFit {
    /// Sorted by (hashtag, location, model).
    pub results: Vec<FitResult>,
    /// Sorted the same way.
    pub skipped: Vec<SkipRecord>,
}

impl CorpusFit {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.results.iter().map(FitResult::summary_row).collect()
    }
}

/// Seed for one fit: FNV-1a over its identity, mixed into the global seed
/// with a splitmix64 finalizer.
pub fn fit_seed(global: u64, hashtag: &str, location: Option<&str>, kind: ModelKind) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let loc = location.map(str::as_bytes);
    for part in [Some(hashtag.as_bytes()), loc, Some(kind.as_str().as_bytes())] {
        // A separator byte keeps ("ab", "c") apart from ("a", "bc"); None differs from Some("").
        for &b in part.unwrap_or(&[0xff]).iter().chain(&[0u8]) {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    let mut z = global ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Smooth, extract and fit one series under one model.
pub fn fit_series(events: &EventSeries, kind: ModelKind, config: &PipelineConfig) -> Result<FitResult> {
    let s = &config.series;
    let series = smooth(events, s.window, s.step)?;
    let occ = extract_occurrence(&series, s.fraction)?;
    let mut fit_config = config.fit_config(kind);
    fit_config.seed = fit_seed(config.fit.seed, &events.hashtag, events.location.as_deref(), kind);
    fit(&occ, kind, &fit_config)
}

/// Fit every series under every configured model using `config.jobs`
/// workers. Per-fit failures land in the skip list; `progress` sees each
/// finished job as `(done, total)`.
pub fn fit_corpus<P>(corpus: &[EventSeries], config: &PipelineConfig, progress: P) -> Result<CorpusFit>
where
    P: Fn(usize, usize) + Sync,
{
    config.validate()?;
    let mut jobs: Vec<(&EventSeries, ModelKind)> = corpus
        .iter()
        .flat_map(|s| config.models.iter().map(move |&k| (s, k)))
        .collect();
    jobs.sort_by(|a, b| {
        (&a.0.hashtag, &a.0.location, a.1.as_str()).cmp(&(&b.0.hashtag, &b.0.location, b.1.as_str()))
    });

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let outcomes: Vec<Result<FitResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(series, kind)| {
                let out = fit_series(series, kind, config);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(n, total);
                out
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for ((series, kind), outcome) in jobs.into_iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => skipped.push(SkipRecord {
                hashtag: series.hashtag.clone(),
                location: series.location.clone().unwrap_or_default(),
                model: kind,
                reason: e.to_string(),
            }),
        }
    }
    Ok(CorpusFit { results, skipped })
}

pub fn write_skip_csv<W: Write>(skipped: &[SkipRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if skipped.is_empty() {
        w.write_record(["hashtag", "location", "model", "reason"])?;
    }
    for s in skipped {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

//! Posterior for one occurrence under one model, and the end-to-end fit.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, reproduction_number, ModelKind, ParamVector};
use crate::error::{Error, Result};
use crate::inference::ensemble::{self, Chain, Ensemble, LogDensity, StretchSampler};
use crate::inference::init::{ball_walkers, locate_mode, uniform_walkers, InitStrategy};
use crate::inference::summary::{integrated_autocorr_time, summarize, ChainSummary, Interval};
use crate::series::{occurrence_counts, Occurrence};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Uniform prior support. `beta`, `decay` and `sigma` are open at zero;
/// `s0` and `i0` are closed intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBox {
    pub beta_max: f64,
    pub decay_max: f64,
    pub s0_min: f64,
    pub s0_max: f64,
    pub i0_max: f64,
    pub sigma_max: f64,
}

impl PriorBox {
    /// Default support. ν in SIRI scales with the population, so its bound is
    /// far wider than γ's.
    pub fn default_for(kind: ModelKind) -> Self {
        PriorBox {
            beta_max: 20.0,
            decay_max: match kind {
                ModelKind::Sir => 20.0,
                ModelKind::Siri => 1e7,
            },
            s0_min: 1.0,
            s0_max: 1e8,
            i0_max: 1e6,
            sigma_max: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta_max > 0.0
            && self.decay_max > 0.0
            && self.s0_min >= 0.0
            && self.s0_min < self.s0_max
            && self.i0_max > 1.0
            && self.sigma_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior box {self:?}")))
        }
    }

    pub fn contains(&self, p: &ParamVector) -> bool {
        p.beta > 0.0
            && p.beta <= self.beta_max
            && p.decay > 0.0
            && p.decay <= self.decay_max
            && p.s0 >= self.s0_min
            && p.s0 <= self.s0_max
            && p.i0 >= 1.0
            && p.i0 <= self.i0_max
            && p.sigma > 0.0
            && p.sigma <= self.sigma_max
    }

    pub fn lower(&self) -> [f64; 5] {
        [0.0, 0.0, self.s0_min, 1.0, 0.0]
    }

    pub fn upper(&self) -> [f64; 5] {
        [self.beta_max, self.decay_max, self.s0_max, self.i0_max, self.sigma_max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Total walker-samples drawn, burn-in included.
    pub total_samples: usize,
    pub burn_in_fraction: f64,
    /// `None` picks `max(2·dim + 2, 50)`.
    pub walkers: Option<usize>,
    pub stretch_a: f64,
    pub seed: u64,
    /// `None` uses [`PriorBox::default_for`] the fitted model.
    pub prior: Option<PriorBox>,
    /// Evaluate half-ensemble proposals on the rayon pool.
    pub parallel: bool,
    pub init: InitStrategy,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            total_samples: 20_000,
            burn_in_fraction: 0.5,
            walkers: None,
            stretch_a: 2.0,
            seed: 0,
            prior: None,
            parallel: false,
            init: InitStrategy::default(),
        }
    }
}

impl FitConfig {
    pub fn n_walkers(&self) -> usize {
        let w = self.walkers.unwrap_or_else(|| Ensemble::min_walkers(ParamVector::DIM).max(50));
        w + w % 2
    }

    pub fn prior_for(&self, kind: ModelKind) -> PriorBox {
        self.prior.unwrap_or_else(|| PriorBox::default_for(kind))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config(format!("burn-in fraction {} not in [0, 1)", self.burn_in_fraction)));
        }
        if !(self.stretch_a > 1.0) {
            return Err(Error::Config(format!("stretch scale {} must exceed 1", self.stretch_a)));
        }
        if self.n_walkers() < Ensemble::min_walkers(ParamVector::DIM) {
            return Err(Error::Config(format!(
                "need at least {} walkers",
                Ensemble::min_walkers(ParamVector::DIM)
            )));
        }
        if self.total_samples < self.n_walkers() {
            return Err(Error::Config("total_samples must cover at least one sweep".into()));
        }
        if let Some(p) = &self.prior {
            p.validate()?;
        }
        Ok(())
    }

    /// (total sweeps, burn-in sweeps)
    pub fn schedule(&self) -> (usize, usize) {
        let sweeps = (self.total_samples / self.n_walkers()).max(1);
        let burn = (sweeps as f64 * self.burn_in_fraction).floor() as usize;
        (sweeps, burn)
    }
}

/// Log posterior of an occurrence: uniform prior on a [`PriorBox`] and
/// independent Gaussian noise of scale σ between observed per-window counts
/// and the model's infected compartment.
#[derive(Debug, Clone)]
pub struct Posterior {
    kind: ModelKind,
    prior: PriorBox,
    times: Vec<f64>,
    counts: Vec<f64>,
}

impl Posterior {
    /// Times are rebased so the occurrence starts at zero.
    pub fn new(occ: &Occurrence, kind: ModelKind, prior: PriorBox) -> Self {
        let (times, counts) = occurrence_counts(occ).into_iter().map(|(t, y)| (t - occ.t1, y)).unzip();
        Posterior { kind, prior, times, counts }
    }

    pub fn from_data(times: Vec<f64>, counts: Vec<f64>, kind: ModelKind, prior: PriorBox) -> Self {
        Posterior { kind, prior, times, counts }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn evaluate(&self, params: &ParamVector) -> f64 {
        if !self.prior.contains(params) {
            return f64::NEG_INFINITY;
        }
        let traj = match integrate(self.kind, params, &self.times) {
            Ok(t) => t,
            Err(_) => return f64::NEG_INFINITY,
        };
        let sse: f64 = self
            .counts
            .iter()
            .zip(&traj.i)
            .map(|(y, i)| (y - i) * (y - i))
            .sum();
        let n = self.counts.len() as f64;
        let lp = -sse / (2.0 * params.sigma * params.sigma) - n * params.sigma.ln() - 0.5 * n * LN_2PI;
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

impl LogDensity for Posterior {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.evaluate(&ParamVector::from_slice(x))
    }
}

pub fn log_posterior(params: &ParamVector, occ: &Occurrence, kind: ModelKind, prior: &PriorBox) -> f64 {
    Posterior::new(occ, kind, *prior).evaluate(params)
}

/// Data-informed box for walker initialization, intersected with the prior.
/// Returns (lower, upper) per parameter.
pub fn init_box(occ: &Occurrence, prior: &PriorBox) -> ([f64; 5], [f64; 5]) {
    let peak_count = occ.peak_value * occ.window;
    let total_count: f64 = occ.values.iter().sum::<f64>() * occ.step;
    let rise = (occ.peak_time - occ.t1).max(occ.step);
    let rate_hi = 10.0 / rise;
    let lo = [0.0, 0.0, peak_count, 1.0, 0.0];
    let hi = [rate_hi, rate_hi, 100.0 * total_count.max(peak_count), peak_count.max(1.0), peak_count];
    let (p_lo, p_hi) = (prior.lower(), prior.upper());
    let mut out_lo = [0.0; 5];
    let mut out_hi = [0.0; 5];
    for k in 0..5 {
        out_lo[k] = lo[k].max(p_lo[k]);
        out_hi[k] = hi[k].min(p_hi[k]);
        if out_hi[k] <= out_lo[k] {
            out_lo[k] = p_lo[k];
            out_hi[k] = p_hi[k];
        }
    }
    (out_lo, out_hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub acceptance_fraction: f64,
    /// Integrated autocorrelation time per parameter, in sweeps.
    pub autocorr_time: Vec<f64>,
    pub walkers: usize,
    pub sweeps: usize,
    pub burn_in_sweeps: usize,
    /// The occurrence was clamped at a series boundary.
    pub low_information: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hashtag: String,
    pub location: Option<String>,
    pub kind: ModelKind,
    pub chain: Chain,
    pub map_params: ParamVector,
    pub summary: ChainSummary,
    /// Reproduction number evaluated at every chain sample.
    pub r_chain: Vec<f64>,
    pub r_interval: Interval,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn r_number(&self) -> f64 {
        self.r_interval.median
    }

    pub fn interval(&self, param: usize) -> Interval {
        self.summary.intervals[param]
    }

    pub fn summary_row(&self) -> SummaryRow {
        let iv = |k: usize| self.summary.intervals[k];
        SummaryRow {
            hashtag: self.hashtag.clone(),
            location: self.location.clone().unwrap_or_default(),
            model: self.kind,
            beta_med: iv(0).median,
            beta_lo: iv(0).lo,
            beta_hi: iv(0).hi,
            decay_med: iv(1).median,
            decay_lo: iv(1).lo,
            decay_hi: iv(1).hi,
            s0_med: iv(2).median,
            i0_med: iv(3).median,
            sigma_med: iv(4).median,
            r_med: self.r_interval.median,
            r_lo: self.r_interval.lo,
            r_hi: self.r_interval.hi,
            accept_frac: self.diagnostics.acceptance_fraction,
            n_samples: self.chain.len(),
        }
    }

    /// Full post-burn-in chain, one column per parameter plus ℛ.
    pub fn write_chain_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},R", ParamVector::NAMES.join(","))?;
        for (row, r) in self.chain.rows().zip(&self.r_chain) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{},{}", cells.join(","), r)?;
        }
        Ok(())
    }
}

/// One line of the per-hashtag summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub hashtag: String,
    pub location: String,
    pub model: ModelKind,
    pub beta_med: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub decay_med: f64,
    pub decay_lo: f64,
    pub decay_hi: f64,
    pub s0_med: f64,
    pub i0_med: f64,
    pub sigma_med: f64,
    #[serde(rename = "R_med")]
    pub r_med: f64,
    #[serde(rename = "R_lo")]
    pub r_lo: f64,
    #[serde(rename = "R_hi")]
    pub r_hi: f64,
    pub accept_frac: f64,
    pub n_samples: usize,
}

impl SummaryRow {
    pub fn location(&self) -> Option<&str> {
        (!self.location.is_empty()).then_some(self.location.as_str())
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer.write_record(SUMMARY_COLUMNS)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub const SUMMARY_COLUMNS: [&str; 17] = [
    "hashtag", "location", "model", "beta_med", "beta_lo", "beta_hi", "decay_med", "decay_lo", "decay_hi", "s0_med",
    "i0_med", "sigma_med", "R_med", "R_lo", "R_hi", "accept_frac", "n_samples",
];

/// Sample the posterior of `occ` under `kind`.
pub fn fit(occ: &Occurrence, kind: ModelKind, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let prior = config.prior_for(kind);
    let target = Posterior::new(occ, kind, prior);
    let n_walkers = config.n_walkers();

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = init_box(occ, &prior);
    let walkers = match config.init {
        InitStrategy::Uniform => uniform_walkers(&target, &lo, &hi, n_walkers, &mut init_rng),
        InitStrategy::Optimized => match locate_mode(&target, &lo, &hi, &mut init_rng) {
            Some(mode) => ball_walkers(&target, &mode, n_walkers, &mut init_rng),
            None => uniform_walkers(&target, &lo, &hi, n_walkers, &mut init_rng),
        },
    };

    let mut ensemble = Ensemble::new(walkers, &target)?;
    let mut sampler = StretchSampler::new(config.stretch_a, config.seed, n_walkers)?.parallel(config.parallel);
    let (sweeps, burn_in) = config.schedule();
    let chain = ensemble::run(&mut sampler, &mut ensemble, &target, sweeps, burn_in);

    finish(occ, kind, chain, &ensemble, sweeps, burn_in)
}

fn finish(
    occ: &Occurrence,
    kind: ModelKind,
    chain: Chain,
    ensemble: &Ensemble,
    sweeps: usize,
    burn_in: usize,
) -> Result<FitResult> {
    let acceptance_fraction = ensemble.acceptance_fraction();
    if acceptance_fraction < 0.02 {
        return Err(Error::DegenerateFit(format!(
            "acceptance fraction {acceptance_fraction:.4} below 0.02"
        )));
    }
    let summary = summarize(&chain)?;
    if summary.intervals.iter().all(|iv| iv.width() == 0.0) && chain.rows().all(|r| r == chain.row(0)) {
        return Err(Error::DegenerateFit("all post-burn-in samples identical".into()));
    }
    let map_index = chain.argmax().expect("non-empty chain");
    let map_params = ParamVector::from_slice(chain.row(map_index));
    let r_chain: Vec<f64> = chain
        .rows()
        .map(|r| reproduction_number(kind, &ParamVector::from_slice(r)))
        .collect();
    let r_interval = Interval::of(&r_chain);
    let autocorr_time = (0..chain.dim()).map(|k| integrated_autocorr_time(&chain, k)).collect();

    Ok(FitResult {
        hashtag: occ.hashtag.clone(),
        location: occ.location.clone(),
        kind,
        map_params,
        summary,
        r_chain,
        r_interval,
        diagnostics: Diagnostics {
            acceptance_fraction,
            autocorr_time,
            walkers: ensemble.len(),
            sweeps,
            burn_in_sweeps: burn_in,
            low_information: occ.is_clamped(),
        },
        chain,
    })
}

//! Synthetic event streams with known ground truth.
//!
//! A scenario integrates its true model, then for each grid cell of width
//! `step` draws an event count whose expectation is `I(t) · step / window`, so
//! that a window-wide boxcar sees on average `I(t)` events. Events are spread
//! uniformly inside their cell.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, reproduction_number, ModelKind, ParamVector};
use crate::error::{Error, Result};
use crate::inference::{fit, FitConfig, FitResult};
use crate::ingest::{EventRecord, EventSeries};
use crate::pipeline::SeriesSettings;
use crate::series::{extract_occurrence, smooth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    /// Poisson counts per cell.
    PoissonCounts,
    /// Rounded Gaussian counts per cell with the truth's σ, floored at zero.
    GaussianCounts,
}

impl std::str::FromStr for Emission {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" | "poisson_counts" => Ok(Emission::PoissonCounts),
            "gaussian" | "gaussian_counts" => Ok(Emission::GaussianCounts),
            other => Err(Error::Config(format!("unknown emission '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    pub kind: ModelKind,
    pub truth: ParamVector,
    /// Hours simulated.
    pub duration: f64,
    pub seed: u64,
    pub emission: Emission,
    /// Smoothing window the emitted counts are normalized to.
    pub window: f64,
    pub hashtag: String,
    pub location: Option<String>,
}

impl SynthScenario {
    pub fn new(kind: ModelKind, truth: ParamVector, duration: f64, seed: u64) -> Self {
        SynthScenario {
            kind,
            truth,
            duration,
            seed,
            emission: Emission::PoissonCounts,
            window: 1.0,
            hashtag: "synthetic".into(),
            location: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("scenario duration {} must be positive", self.duration)));
        }
        if !(self.window > 0.0) {
            return Err(Error::Config("scenario window must be positive".into()));
        }
        // β = 0 is a legitimate truth (pure decay), so only the remaining fields must be positive.
        let t = &self.truth;
        let ok = t.beta >= 0.0 && t.decay > 0.0 && t.s0 > 0.0 && t.i0 >= 1.0 && t.sigma > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid truth parameters {t}")));
        }
        Ok(())
    }

    pub fn truth_r(&self) -> f64 {
        reproduction_number(self.kind, &self.truth)
    }

    /// Expected events per cell of width `step`, at cell midpoints.
    pub fn expected_counts(&self, step: f64) -> Result<Vec<f64>> {
        let cells = (self.duration / step).ceil() as usize;
        let mids: Vec<f64> = (0..cells)
            .map(|k| {
                let lo = k as f64 * step;
                let hi = ((k + 1) as f64 * step).min(self.duration);
                0.5 * (lo + hi)
            })
            .collect();
        let traj = integrate(self.kind, &self.truth, &mids)?;
        Ok(traj
            .i
            .iter()
            .enumerate()
            .map(|(k, i)| {
                let width = ((k + 1) as f64 * step).min(self.duration) - k as f64 * step;
                i.max(0.0) * width / self.window
            })
            .collect())
    }
}

/// Event times in hours from the scenario start, sorted.
pub fn generate_event_times(scenario: &SynthScenario, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("synthetic cell width {step} must be positive")));
    }
    scenario.validate()?;
    let means = scenario.expected_counts(step)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut times = Vec::new();
    for (k, &mean) in means.iter().enumerate() {
        let lo = k as f64 * step;
        let hi = ((k + 1) as f64 * step).min(scenario.duration);
        let count = match scenario.emission {
            Emission::PoissonCounts => {
                if mean > 0.0 {
                    Poisson::new(mean).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng) as u64
                } else {
                    0
                }
            }
            Emission::GaussianCounts => {
                let sd = scenario.truth.sigma * ((hi - lo) / scenario.window).sqrt();
                let draw = Normal::new(mean, sd).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng);
                draw.round().max(0.0) as u64
            }
        };
        let start = times.len();
        times.extend((0..count).map(|_| lo + rng.gen::<f64>() * (hi - lo)));
        times[start..].sort_by(f64::total_cmp);
    }
    Ok(times)
}

pub fn generate_events(scenario: &SynthScenario, step: f64) -> Result<EventSeries> {
    let times = generate_event_times(scenario, step)?;
    EventSeries::from_hours(scenario.hashtag.clone(), scenario.location.clone(), times).ok_or(Error::EmptyInput)
}

/// Default wall-clock origin for written scenarios.
pub fn default_origin() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2015, 7, 5, 0, 0, 0).unwrap()
}

/// Convert event times (hours after `origin`) to ingestable records.
pub fn to_records(scenario: &SynthScenario, times: &[f64], origin: DateTime<Utc>) -> Vec<EventRecord> {
    times
        .iter()
        .filter_map(|&h| {
            let ts = origin + Duration::milliseconds((h * 3_600_000.0).round() as i64);
            EventRecord::new(ts, &scenario.hashtag, scenario.location.as_deref())
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub truth_r: f64,
    pub fit: FitResult,
    pub covered: bool,
}

/// Generate → smooth → extract → fit, and check whether the 95% interval of ℛ
/// covers the truth. Events are emitted on cells one smoothing window wide.
pub fn recovery_trial(scenario: &SynthScenario, settings: &SeriesSettings, config: &FitConfig) -> Result<TrialOutcome> {
    let events = generate_events(scenario, settings.window)?;
    let series = smooth(&events, settings.window, settings.step)?;
    let occ = extract_occurrence(&series, settings.fraction)?;
    let result = fit(&occ, scenario.kind, config)?;
    let truth_r = scenario.truth_r();
    Ok(TrialOutcome {
        truth_r,
        covered: result.r_interval.contains(truth_r),
        fit: result,
    })
}

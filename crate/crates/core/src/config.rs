//! Pipeline settings read from a flat `key = value` file.
//!
//! The file is TOML restricted to top-level scalars and arrays. Unknown keys
//! are rejected so typos do not silently fall back to defaults. Command-line
//! flags are applied on top of the file by the caller.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynamics::{ModelKind, ParamVector};
use crate::error::{Error, Result};
use crate::inference::{FitConfig, InitStrategy, PriorBox};
use crate::pipeline::SeriesSettings;
use crate::synth::{Emission, SynthScenario};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub series: SeriesSettings,
    pub fit: FitConfig,
    pub models: Vec<ModelKind>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub prior: PriorOverrides,
}

/// Per-bound prior overrides, applied on top of each model's default box.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PriorOverrides {
    pub beta_max: Option<f64>,
    pub decay_max: Option<f64>,
    pub s0_min: Option<f64>,
    pub s0_max: Option<f64>,
    pub i0_max: Option<f64>,
    pub sigma_max: Option<f64>,
}

impl PriorOverrides {
    pub fn resolve(&self, kind: ModelKind) -> PriorBox {
        let mut p = PriorBox::default_for(kind);
        set(&mut p.beta_max, self.beta_max);
        set(&mut p.decay_max, self.decay_max);
        set(&mut p.s0_min, self.s0_min);
        set(&mut p.s0_max, self.s0_max);
        set(&mut p.i0_max, self.i0_max);
        set(&mut p.sigma_max, self.sigma_max);
        p
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            series: SeriesSettings::default(),
            fit: FitConfig::default(),
            models: vec![ModelKind::Sir],
            out_dir: PathBuf::from("."),
            jobs: 1,
            prior: PriorOverrides::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.series;
        if !(s.window > 0.0 && s.window.is_finite()) {
            return Err(Error::Config(format!("window {} must be positive", s.window)));
        }
        if !(s.step > 0.0 && s.step.is_finite()) {
            return Err(Error::Config(format!("step {} must be positive", s.step)));
        }
        if !(s.fraction > 0.0 && s.fraction < 1.0) {
            return Err(Error::Config(format!("fraction {} not in (0, 1)", s.fraction)));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        for &kind in &self.models {
            self.fit_config(kind).validate()?;
        }
        Ok(())
    }

    /// Fit settings for one model with the prior resolved.
    pub fn fit_config(&self, kind: ModelKind) -> FitConfig {
        FitConfig {
            prior: Some(self.prior.resolve(kind)),
            ..self.fit.clone()
        }
    }
}

/// `models = "sir,siri"` or `models = ["sir", "siri"]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelList {
    Joined(String),
    List(Vec<String>),
}

/// Every key the file may carry. All optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub window: Option<f64>,
    pub step: Option<f64>,
    pub fraction: Option<f64>,
    pub models: Option<ModelList>,
    pub samples: Option<usize>,
    pub burn_in: Option<f64>,
    pub walkers: Option<usize>,
    pub stretch_a: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub init: Option<InitStrategy>,

    pub prior_beta_max: Option<f64>,
    pub prior_decay_max: Option<f64>,
    pub prior_s0_min: Option<f64>,
    pub prior_s0_max: Option<f64>,
    pub prior_i0_max: Option<f64>,
    pub prior_sigma_max: Option<f64>,

    pub synth_model: Option<String>,
    pub synth_beta: Option<f64>,
    pub synth_decay: Option<f64>,
    pub synth_s0: Option<f64>,
    pub synth_i0: Option<f64>,
    pub synth_sigma: Option<f64>,
    pub synth_duration: Option<f64>,
    pub synth_seed: Option<u64>,
    pub synth_emission: Option<String>,
    pub synth_hashtag: Option<String>,
    pub synth_location: Option<String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Apply the file's values over `base`.
    pub fn apply(&self, base: &mut PipelineConfig) -> Result<()> {
        set(&mut base.series.window, self.window);
        set(&mut base.series.step, self.step);
        set(&mut base.series.fraction, self.fraction);
        if let Some(models) = &self.models {
            base.models = match models {
                ModelList::Joined(text) => parse_models(text.split(','))?,
                ModelList::List(names) => parse_models(names.iter().map(String::as_str))?,
            };
        }
        set(&mut base.fit.total_samples, self.samples);
        set(&mut base.fit.burn_in_fraction, self.burn_in);
        if self.walkers.is_some() {
            base.fit.walkers = self.walkers;
        }
        set(&mut base.fit.stretch_a, self.stretch_a);
        set(&mut base.fit.seed, self.seed);
        set(&mut base.fit.init, self.init);
        set(&mut base.jobs, self.jobs);
        if let Some(dir) = &self.out_dir {
            base.out_dir = dir.clone();
        }
        self.apply_prior(base);
        Ok(())
    }

    fn apply_prior(&self, base: &mut PipelineConfig) {
        let p = &mut base.prior;
        set_opt(&mut p.beta_max, self.prior_beta_max);
        set_opt(&mut p.decay_max, self.prior_decay_max);
        set_opt(&mut p.s0_min, self.prior_s0_min);
        set_opt(&mut p.s0_max, self.prior_s0_max);
        set_opt(&mut p.i0_max, self.prior_i0_max);
        set_opt(&mut p.sigma_max, self.prior_sigma_max);
    }

    /// Scenario from the `synth_*` keys, falling back to `fallback`.
    pub fn scenario(&self, fallback: SynthScenario) -> Result<SynthScenario> {
        let mut s = fallback;
        if let Some(m) = &self.synth_model {
            s.kind = m.parse()?;
        }
        set(&mut s.truth.beta, self.synth_beta);
        set(&mut s.truth.decay, self.synth_decay);
        set(&mut s.truth.s0, self.synth_s0);
        set(&mut s.truth.i0, self.synth_i0);
        set(&mut s.truth.sigma, self.synth_sigma);
        set(&mut s.duration, self.synth_duration);
        set(&mut s.seed, self.synth_seed);
        if let Some(e) = &self.synth_emission {
            s.emission = e.parse::<Emission>()?;
        }
        if let Some(h) = &self.synth_hashtag {
            s.hashtag = h.clone();
        }
        if self.synth_location.is_some() {
            s.location = self.synth_location.clone();
        }
        Ok(s)
    }
}

fn set_opt<T: Copy>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parse model names, dropping duplicates but keeping first-seen order.
pub fn parse_models<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Vec<ModelKind>> {
    let mut out = Vec::new();
    for name in names {
        let kind: ModelKind = name.trim().parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no models requested".into()));
    }
    Ok(out)
}

/// Default synthetic scenario: a clearly infectious SIR burst.
pub fn default_scenario() -> SynthScenario {
    SynthScenario::new(ModelKind::Sir, ParamVector::new(0.6, 0.2, 5000.0, 10.0, 20.0), 80.0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let file = ConfigFile::parse(
            "window = 2.0\nstep = 0.5\nmodels = [\"sir\", \"siri\"]\nsamples = 4000\nseed = 9\nprior_beta_max = 5.0\n",
        )
        .unwrap();
        let mut cfg = PipelineConfig::default();
        file.apply(&mut cfg).unwrap();
        assert_eq!(cfg.series.window, 2.0);
        assert_eq!(cfg.series.step, 0.5);
        assert_eq!(cfg.series.fraction, 0.01);
        assert_eq!(cfg.models, vec![ModelKind::Sir, ModelKind::Siri]);
        assert_eq!(cfg.fit.total_samples, 4000);
        assert_eq!(cfg.fit.seed, 9);
        assert_eq!(cfg.fit_config(ModelKind::Sir).prior.unwrap().beta_max, 5.0);
        let siri = cfg.fit_config(ModelKind::Siri).prior.unwrap();
        assert_eq!(siri.beta_max, 5.0);
        assert_eq!(siri.decay_max, PriorBox::default_for(ModelKind::Siri).decay_max);
        cfg.validate().unwrap();
    }

    #[test]
    fn comma_separated_models() {
        let mut cfg = PipelineConfig::default();
        ConfigFile::parse("models = \"siri, sir\"").unwrap().apply(&mut cfg).unwrap();
        assert_eq!(cfg.models, vec![ModelKind::Siri, ModelKind::Sir]);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ConfigFile::parse("windw = 2.0").is_err());
    }

    #[test]
    fn invalid_fraction_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.series.fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scenario_keys() {
        let file = ConfigFile::parse("synth_model = \"siri\"\nsynth_beta = 1.5\nsynth_emission = \"gaussian\"").unwrap();
        let s = file.scenario(default_scenario()).unwrap();
        assert_eq!(s.kind, ModelKind::Siri);
        assert_eq!(s.truth.beta, 1.5);
        assert_eq!(s.emission, Emission::GaussianCounts);
    }
}

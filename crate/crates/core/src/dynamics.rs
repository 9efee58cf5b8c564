//! SIR and SIRI compartmental models.
//!
//! Both systems conserve `N = S + I + R`. In SIRI the decay of the infected
//! compartment is driven by contact with the recovered one (`ν I R / N`), so
//! the recovered compartment must start at one person rather than zero.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_dense, Tolerances};

/// States below this are clamped to zero before the vector field is evaluated.
const NEGATIVE_GUARD: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sir,
    Siri,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Sir => "sir",
            ModelKind::Siri => "siri",
        }
    }

    /// Initial size of the recovered compartment.
    pub fn initial_recovered(self) -> f64 {
        match self {
            ModelKind::Sir => 0.0,
            ModelKind::Siri => 1.0,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sir" => Ok(ModelKind::Sir),
            "siri" => Ok(ModelKind::Siri),
            other => Err(Error::Config(format!("unknown model '{other}' (expected sir or siri)"))),
        }
    }
}

/// A point in model parameter space. `decay` is γ for SIR and ν for SIRI.
/// Rates are per hour; `s0` and `i0` are persons; `sigma` is the observation
/// noise scale in counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub beta: f64,
    pub decay: f64,
    pub s0: f64,
    pub i0: f64,
    pub sigma: f64,
}

impl ParamVector {
    pub const DIM: usize = 5;
    pub const NAMES: [&'static str; 5] = ["beta", "decay", "s0", "i0", "sigma"];

    pub fn new(beta: f64, decay: f64, s0: f64, i0: f64, sigma: f64) -> Self {
        ParamVector { beta, decay, s0, i0, sigma }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.beta, self.decay, self.s0, self.i0, self.sigma]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        ParamVector::new(x[0], x[1], x[2], x[3], x[4])
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v > 0.0) && self.i0 >= 1.0
    }

    pub fn population(&self, kind: ModelKind) -> f64 {
        self.s0 + self.i0 + kind.initial_recovered()
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "beta={} decay={} s0={} i0={} sigma={}",
            self.beta, self.decay, self.s0, self.i0, self.sigma
        )
    }
}

/// Compartment counts sampled at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub n: f64,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_hours,S,I,R")?;
        for k in 0..self.times.len() {
            writeln!(out, "{},{},{},{}", self.times[k], self.s[k], self.i[k], self.r[k])?;
        }
        Ok(())
    }
}

#[inline]
fn guard(state: [f64; 3]) -> [f64; 3] {
    state.map(|v| if v < NEGATIVE_GUARD { 0.0 } else { v })
}

/// `(−βSI/N, βSI/N − γI, γI)`
#[inline]
pub fn rhs_sir(state: [f64; 3], beta: f64, gamma: f64, n: f64) -> [f64; 3] {
    let [s, i, _] = state;
    let infection = beta * s * i / n;
    let recovery = gamma * i;
    [-infection, infection - recovery, recovery]
}

/// `(−βSI/N, βSI/N − νIR/N, νIR/N)`
#[inline]
pub fn rhs_siri(state: [f64; 3], beta: f64, nu: f64, n: f64) -> [f64; 3] {
    let [s, i, r] = state;
    let infection = beta * s * i / n;
    let recovery = nu * i * r / n;
    [-infection, infection - recovery, recovery]
}

/// Integrate the model from `t = 0` and sample it at `times`.
pub fn integrate(kind: ModelKind, params: &ParamVector, times: &[f64]) -> Result<Trajectory> {
    integrate_with(kind, params, times, Tolerances::default())
}

pub fn integrate_with(kind: ModelKind, params: &ParamVector, times: &[f64], tol: Tolerances) -> Result<Trajectory> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Config("integration times must be sorted and non-negative".into()));
    }
    let n = params.population(kind);
    let y0 = [params.s0, params.i0, kind.initial_recovered()];
    let (beta, decay) = (params.beta, params.decay);
    let solved = match kind {
        ModelKind::Sir => integrate_dense(|_, y| rhs_sir(guard(*y), beta, decay, n), 0.0, y0, times, tol),
        ModelKind::Siri => integrate_dense(|_, y| rhs_siri(guard(*y), beta, decay, n), 0.0, y0, times, tol),
    };
    let states = solved.map_err(|fail| Error::IntegrationFailure {
        t: fail.time(),
        reason: fail.reason().to_owned(),
        params: params.to_string(),
    })?;
    // Compartments that decay to zero can undershoot by about `atol`; report them as empty.
    let col = |k: usize| states.iter().map(|y| y[k].max(0.0)).collect();
    Ok(Trajectory {
        times: times.to_vec(),
        s: col(0),
        i: col(1),
        r: col(2),
        n,
    })
}

/// Threshold quantity for initial growth: `βS₀/(γN)` for SIR, `βS₀/ν` for SIRI.
pub fn reproduction_number(kind: ModelKind, params: &ParamVector) -> f64 {
    match kind {
        ModelKind::Sir => params.beta * params.s0 / (params.decay * (params.s0 + params.i0)),
        ModelKind::Siri => params.beta * params.s0 / params.decay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn no_infected_no_dynamics() {
        assert_eq!(rhs_sir([1000.0, 0.0, 0.0], 0.5, 0.25, 1000.0), [0.0, 0.0, 0.0]);
        assert_eq!(rhs_siri([990.0, 0.0, 10.0], 0.5, 2.0, 1000.0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn sir_growth_example() {
        let d = rhs_sir([1000.0, 1.0, 0.0], 0.5, 0.25, 1000.0);
        assert_relative_eq!(d[1], 0.25, epsilon = 1e-15);
        let decay = rhs_sir([1000.0, 4.0, 0.0], 0.0, 0.25, 1000.0);
        assert_eq!(decay[1], -1.0);
    }

    #[test]
    fn siri_example() {
        // −0.5·990·9/1000, 4.455 − 2·9·1/1000, 2·9·1/1000
        let d = rhs_siri([990.0, 9.0, 1.0], 0.5, 2.0, 1000.0);
        assert_relative_eq!(d[0], -4.455, epsilon = 1e-12);
        assert_relative_eq!(d[1], 4.437, epsilon = 1e-12);
        assert_relative_eq!(d[2], 0.018, epsilon = 1e-12);
        let growth = rhs_siri([990.0, 9.0, 0.0], 0.5, 2.0, 1000.0);
        assert_relative_eq!(growth[1], 0.5 * 990.0 * 9.0 / 1000.0);
    }

    #[test]
    fn rhs_is_bitwise_repeatable() {
        let a = rhs_siri([123.456, 7.89, 1.5], 0.37, 1.91, 132.846);
        let b = rhs_siri([123.456, 7.89, 1.5], 0.37, 1.91, 132.846);
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn pure_decay_closed_form() {
        let p = ParamVector::new(0.0, 1.0, 1000.0, 10.0, 1.0);
        let traj = integrate(ModelKind::Sir, &p, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        for (t, i) in traj.times.iter().zip(&traj.i) {
            assert!((i - 10.0 * (-t).exp()).abs() < 1e-5, "t={t}");
        }
        assert!((traj.i[2] - 3.6788).abs() < 1e-4);
    }

    #[test]
    fn reproduction_numbers() {
        let p = ParamVector::new(0.5, 0.25, 990.0, 10.0, 1.0);
        assert_relative_eq!(reproduction_number(ModelKind::Sir, &p), 1.98, epsilon = 1e-12);
        let boundary = ParamVector::new(0.3, 0.3, 1e12, 1.0, 1.0);
        assert_relative_eq!(reproduction_number(ModelKind::Sir, &boundary), 1.0, epsilon = 1e-11);
        let siri = ParamVector::new(0.01, 2.0, 990.0, 10.0, 1.0);
        assert_relative_eq!(reproduction_number(ModelKind::Siri, &siri), 4.95, epsilon = 1e-12);
    }

    #[test]
    fn siri_starts_with_one_recovered() {
        let p = ParamVector::new(0.5, 2.0, 990.0, 9.0, 1.0);
        let traj = integrate(ModelKind::Siri, &p, &[0.0, 1.0]).unwrap();
        assert_eq!(traj.r[0], 1.0);
        assert_eq!(traj.n, 1000.0);
    }

    #[test]
    fn unsorted_times_rejected() {
        let p = ParamVector::new(0.5, 0.25, 990.0, 10.0, 1.0);
        assert!(integrate(ModelKind::Sir, &p, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("SIR".parse::<ModelKind>().unwrap(), ModelKind::Sir);
        assert_eq!(" siri".parse::<ModelKind>().unwrap(), ModelKind::Siri);
        assert!("seir".parse::<ModelKind>().is_err());
    }
}

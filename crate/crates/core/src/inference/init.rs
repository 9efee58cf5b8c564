//! Walker initialization.
//!
//! Uniform draws over a wide data-informed box tend to leave the ensemble on
//! the broad β ≈ decay plateau (huge `s0`, inflated σ), which is a poor local
//! optimum of the posterior. The default strategy therefore scores a batch of
//! log-uniform candidates from that box, polishes the best few with
//! Nelder–Mead in log-parameter space, and starts the walkers in a tight ball
//! around the best point found.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::inference::ensemble::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Independent uniform draws from the initialization box.
    Uniform,
    /// Multi-start optimization, then a small ball around the best optimum.
    #[default]
    Optimized,
}

const CANDIDATES: usize = 4000;
const STARTS: usize = 12;
/// Nelder–Mead restarts from its own optimum; a fresh simplex escapes early collapse.
const ROUNDS: usize = 3;
const NM_ITERS: u64 = 1500;
const BALL_SCALE: f64 = 1e-3;
const MAX_REDRAWS: usize = 100;

/// Negative log density in log coordinates; zero density maps to a large
/// finite penalty so the simplex can still order its vertices.
struct NegLogDensity<'a, T: ?Sized> {
    target: &'a T,
}

impl<T: LogDensity + ?Sized> CostFunction for NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, log_x: &Self::Param) -> Result<f64, argmin::core::Error> {
        let x: Vec<f64> = log_x.iter().map(|v| v.exp()).collect();
        let lp = self.target.log_density(&x);
        Ok(if lp.is_finite() { -lp } else { 1e300 })
    }
}

pub fn uniform_walkers<T: LogDensity + ?Sized>(
    target: &T,
    lo: &[f64],
    hi: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut draw = Vec::new();
            for _ in 0..MAX_REDRAWS {
                draw = lo
                    .iter()
                    .zip(hi)
                    .map(|(&l, &h)| {
                        // Open at the lower end for the strictly positive parameters.
                        let u: f64 = 1.0 - rng.gen::<f64>();
                        l + u * (h - l)
                    })
                    .collect();
                if target.log_density(&draw).is_finite() {
                    break;
                }
            }
            draw
        })
        .collect()
}

/// Best point found by multi-start Nelder–Mead over positive parameters.
pub fn locate_mode<T: LogDensity + ?Sized>(target: &T, lo: &[f64], hi: &[f64], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let dim = lo.len();
    let log_lo: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| l.max(h * 1e-4).ln()).collect();
    let log_hi: Vec<f64> = hi.iter().map(|h| h.ln()).collect();

    let mut scored: Vec<(f64, Vec<f64>)> = (0..CANDIDATES)
        .filter_map(|_| {
            let log_x: Vec<f64> = (0..dim).map(|k| rng.gen_range(log_lo[k]..=log_hi[k])).collect();
            let x: Vec<f64> = log_x.iter().map(|v| v.exp()).collect();
            let lp = target.log_density(&x);
            lp.is_finite().then_some((lp, log_x))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(STARTS);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (lp0, start) in scored {
        let (mut lp, mut log_x) = (lp0, start);
        for _ in 0..ROUNDS {
            match nelder_mead(target, &log_x) {
                Some((next_lp, next)) if next_lp > lp => {
                    lp = next_lp;
                    log_x = next;
                }
                _ => break,
            }
        }
        if best.as_ref().is_none_or(|(b, _)| lp > *b) {
            best = Some((lp, log_x));
        }
    }
    best.map(|(_, log_x)| log_x.iter().map(|v| v.exp()).collect())
}

fn nelder_mead<T: LogDensity + ?Sized>(target: &T, start: &[f64]) -> Option<(f64, Vec<f64>)> {
    let simplex: Vec<Vec<f64>> = std::iter::once(start.to_vec())
        .chain((0..start.len()).map(|k| {
            let mut v = start.to_vec();
            v[k] += 0.2;
            v
        }))
        .collect();
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).ok()?;
    let res = Executor::new(NegLogDensity { target }, solver)
        .configure(|state| state.max_iters(NM_ITERS))
        .run()
        .ok()?;
    let lp = -res.state.best_cost;
    let param = res.state.best_param?;
    lp.is_finite().then_some((lp, param))
}

/// Walkers scattered multiplicatively around `centre`, redrawn while their
/// density is zero.
pub fn ball_walkers<T: LogDensity + ?Sized>(target: &T, centre: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            for _ in 0..MAX_REDRAWS {
                let draw: Vec<f64> = centre
                    .iter()
                    .map(|&c| {
                        let e: f64 = StandardNormal.sample(rng);
                        c * (BALL_SCALE * e).exp()
                    })
                    .collect();
                if target.log_density(&draw).is_finite() {
                    return draw;
                }
            }
            centre.to_vec()
        })
        .collect()
}

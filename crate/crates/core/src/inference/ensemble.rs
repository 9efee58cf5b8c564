//! Affine-invariant ensemble sampler using the stretch move.
//!
//! Walkers are split into two fixed halves. Each half is updated against the
//! frozen other half, so the proposals inside one half are independent of each
//! other and may be evaluated concurrently. Every walker owns its own random
//! stream derived from the sampler seed, which makes serial and parallel sweeps
//! produce bit-identical ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// An unnormalized log density. `f64::NEG_INFINITY` marks zero density.
pub trait LogDensity: Sync {
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F> LogDensity for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn log_density(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    walkers: Vec<Vec<f64>>,
    log_posts: Vec<f64>,
    step_count: usize,
    accept_count: usize,
    proposal_count: usize,
}

impl Ensemble {
    /// Smallest admissible ensemble for a given dimension.
    pub fn min_walkers(dim: usize) -> usize {
        2 * dim + 2
    }

    pub fn new<T: LogDensity + ?Sized>(walkers: Vec<Vec<f64>>, target: &T) -> Result<Self> {
        let dim = walkers.first().map_or(0, Vec::len);
        if dim == 0 || walkers.iter().any(|w| w.len() != dim) {
            return Err(Error::Config("walkers must share a non-zero dimension".into()));
        }
        if !walkers.len().is_multiple_of(2) || walkers.len() < Self::min_walkers(dim) {
            return Err(Error::Config(format!(
                "need an even number of walkers >= {} for dimension {dim}, got {}",
                Self::min_walkers(dim),
                walkers.len()
            )));
        }
        let log_posts = walkers.iter().map(|w| target.log_density(w)).collect();
        Ok(Ensemble {
            dim,
            walkers,
            log_posts,
            step_count: 0,
            accept_count: 0,
            proposal_count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    pub fn walkers(&self) -> &[Vec<f64>] {
        &self.walkers
    }

    pub fn log_posts(&self) -> &[f64] {
        &self.log_posts
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn accept_count(&self) -> usize {
        self.accept_count
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.proposal_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.proposal_count as f64
        }
    }
}

/// `X_j + z (X_k − X_j)`, evaluated as `X_k + (z − 1)(X_k − X_j)` so that
/// `z = 1` reproduces `X_k` exactly.
pub fn stretch_proposal(current: &[f64], anchor: &[f64], z: f64) -> Vec<f64> {
    current
        .iter()
        .zip(anchor)
        .map(|(&xk, &xj)| xk + (z - 1.0) * (xk - xj))
        .collect()
}

/// Log acceptance ratio `(dim − 1) ln z + lp_new − lp_old`.
pub fn stretch_log_ratio(z: f64, dim: usize, lp_new: f64, lp_old: f64) -> f64 {
    if lp_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (dim as f64 - 1.0) * z.ln() + lp_new - lp_old
}

/// Draw `z` with density ∝ 1/√z on `[1/a, a]` from a uniform variate.
pub fn stretch_factor(a: f64, u: f64) -> f64 {
    let root = (a - 1.0) * u + 1.0;
    root * root / a
}

/// Single-walker update given pre-drawn randomness. Returns the new position
/// and log density when the move is accepted.
pub fn stretch_update<T: LogDensity + ?Sized>(
    current: &[f64],
    current_lp: f64,
    anchor: &[f64],
    z: f64,
    u_accept: f64,
    target: &T,
) -> Option<(Vec<f64>, f64)> {
    let proposal = stretch_proposal(current, anchor, z);
    let lp = target.log_density(&proposal);
    let log_ratio = stretch_log_ratio(z, current.len(), lp, current_lp);
    if log_ratio.is_nan() {
        return None;
    }
    (u_accept.ln() < log_ratio).then_some((proposal, lp))
}

/// Stretch-move driver: scale parameter plus one random stream per walker.
#[derive(Debug, Clone)]
pub struct StretchSampler {
    a: f64,
    streams: Vec<ChaCha8Rng>,
    parallel: bool,
}

impl StretchSampler {
    pub fn new(a: f64, seed: u64, n_walkers: usize) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::Config(format!("stretch scale must exceed 1, got {a}")));
        }
        let streams = (0..n_walkers)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + 1);
                rng
            })
            .collect();
        Ok(StretchSampler { a, streams, parallel: false })
    }

    /// Evaluate the proposals of each half-ensemble on the rayon pool.
    pub fn parallel(mut self, enabled: bool) -> Self {
        self.parallel = enabled;
        self
    }

    /// One full sweep: first half against the second, then the second against
    /// the freshly updated first.
    pub fn sweep<T: LogDensity + ?Sized>(&mut self, ensemble: &mut Ensemble, target: &T) {
        assert_eq!(self.streams.len(), ensemble.len(), "one stream per walker");
        let half = ensemble.len() / 2;
        let (a, parallel) = (self.a, self.parallel);

        let (first_w, second_w) = ensemble.walkers.split_at_mut(half);
        let (first_lp, second_lp) = ensemble.log_posts.split_at_mut(half);
        let (first_rng, second_rng) = self.streams.split_at_mut(half);

        let mut accepted = update_half(first_w, first_lp, first_rng, second_w, a, target, parallel);
        accepted += update_half(second_w, second_lp, second_rng, first_w, a, target, parallel);

        ensemble.accept_count += accepted;
        ensemble.proposal_count += ensemble.walkers.len();
        ensemble.step_count += 1;
    }
}

fn update_half<T: LogDensity + ?Sized>(
    active: &mut [Vec<f64>],
    active_lp: &mut [f64],
    streams: &mut [ChaCha8Rng],
    complement: &[Vec<f64>],
    a: f64,
    target: &T,
    parallel: bool,
) -> usize {
    let step = |((x, lp), rng): ((&mut Vec<f64>, &mut f64), &mut ChaCha8Rng)| -> usize {
        let z = stretch_factor(a, rng.gen::<f64>());
        let anchor = &complement[rng.gen_range(0..complement.len())];
        let u: f64 = rng.gen();
        match stretch_update(x, *lp, anchor, z, u, target) {
            Some((next, next_lp)) => {
                *x = next;
                *lp = next_lp;
                1
            }
            None => 0,
        }
    };
    if parallel {
        active
            .par_iter_mut()
            .zip(active_lp.par_iter_mut())
            .zip(streams.par_iter_mut())
            .map(step)
            .sum()
    } else {
        active
            .iter_mut()
            .zip(active_lp.iter_mut())
            .zip(streams.iter_mut())
            .map(step)
            .sum()
    }
}

/// Post-burn-in samples, stored sweep-major then walker-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    dim: usize,
    n_walkers: usize,
    samples: Vec<f64>,
    log_posts: Vec<f64>,
}

impl Chain {
    pub fn new(dim: usize, n_walkers: usize) -> Self {
        Chain {
            dim,
            n_walkers,
            samples: Vec::new(),
            log_posts: Vec::new(),
        }
    }

    /// Build a chain from explicit rows, treating them as one walker.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut chain = Chain::new(dim, 1);
        for r in rows {
            chain.samples.extend_from_slice(r);
            chain.log_posts.push(0.0);
        }
        chain
    }

    pub fn record(&mut self, ensemble: &Ensemble) {
        for (w, lp) in ensemble.walkers.iter().zip(&ensemble.log_posts) {
            self.samples.extend_from_slice(w);
            self.log_posts.push(*lp);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_walkers(&self) -> usize {
        self.n_walkers
    }

    /// Number of recorded samples (walkers × sweeps).
    pub fn len(&self) -> usize {
        self.log_posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_posts.is_empty()
    }

    pub fn n_sweeps(&self) -> usize {
        self.len().checked_div(self.n_walkers).unwrap_or(0)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.samples[index * self.dim..(index + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim.max(1))
    }

    pub fn log_posts(&self) -> &[f64] {
        &self.log_posts
    }

    pub fn column(&self, param: usize) -> Vec<f64> {
        self.rows().map(|r| r[param]).collect()
    }

    /// Trace of one parameter for one walker.
    pub fn walker_trace(&self, walker: usize, param: usize) -> Vec<f64> {
        (0..self.n_sweeps())
            .map(|s| self.samples[(s * self.n_walkers + walker) * self.dim + param])
            .collect()
    }

    /// Index of the highest log density; earliest wins on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &lp) in self.log_posts.iter().enumerate() {
            if best.is_none_or(|(_, b)| lp > b) {
                best = Some((i, lp));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Run `sweeps` stretch-move sweeps, recording every sweep after the first
/// `burn_in` into the returned chain.
pub fn run<T: LogDensity + ?Sized>(
    sampler: &mut StretchSampler,
    ensemble: &mut Ensemble,
    target: &T,
    sweeps: usize,
    burn_in: usize,
) -> Chain {
    let mut chain = Chain::new(ensemble.dim(), ensemble.len());
    for s in 0..sweeps {
        sampler.sweep(ensemble, target);
        if s >= burn_in {
            chain.record(ensemble);
        }
    }
    chain
}

//! Posterior summaries: quantiles, credible intervals, correlations and
//! integrated autocorrelation times.

use crate::error::{Error, Result};
use crate::inference::ensemble::Chain;

pub const MIN_CHAIN_LEN: usize = 100;

/// Quantile of sorted data with linear interpolation between order statistics
/// at plotting positions `(k − 0.5) / n`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n as f64 * p + 0.5).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// Median and central 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Interval {
            median: quantile_sorted(&sorted, 0.5),
            lo: quantile_sorted(&sorted, 0.025),
            hi: quantile_sorted(&sorted, 0.975),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub intervals: Vec<Interval>,
    /// Pearson correlations; entries involving a constant parameter are 0.
    pub correlation: Vec<Vec<f64>>,
    /// Set when some parameter has zero variance over the chain.
    pub degenerate: bool,
}

pub fn summarize(chain: &Chain) -> Result<ChainSummary> {
    if chain.len() < MIN_CHAIN_LEN {
        return Err(Error::ChainTooShort {
            len: chain.len(),
            min: MIN_CHAIN_LEN,
        });
    }
    let columns: Vec<Vec<f64>> = (0..chain.dim()).map(|j| chain.column(j)).collect();
    let intervals = columns.iter().map(|c| Interval::of(c)).collect();

    let n = chain.len() as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let centred: Vec<Vec<f64>> = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let norms: Vec<f64> = centred.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let degenerate = norms.contains(&0.0);

    let dim = chain.dim();
    let mut correlation = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        for b in 0..dim {
            if norms[a] == 0.0 || norms[b] == 0.0 {
                continue;
            }
            let dot: f64 = centred[a].iter().zip(&centred[b]).map(|(x, y)| x * y).sum();
            correlation[a][b] = (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0);
        }
    }
    Ok(ChainSummary {
        intervals,
        correlation,
        degenerate,
    })
}

/// Integrated autocorrelation time (in sweeps) for one parameter, from the
/// walker-averaged autocorrelation function with Sokal's adaptive window
/// (smallest `M` with `M ≥ 5 τ(M)`).
pub fn integrated_autocorr_time(chain: &Chain, param: usize) -> f64 {
    let sweeps = chain.n_sweeps();
    if sweeps < 2 {
        return f64::NAN;
    }
    // Centred traces with their lag-0 autocovariance; constant traces drop out.
    let traces: Vec<(Vec<f64>, f64)> = (0..chain.n_walkers())
        .filter_map(|w| {
            let trace = chain.walker_trace(w, param);
            let mean = trace.iter().sum::<f64>() / sweeps as f64;
            let centred: Vec<f64> = trace.iter().map(|v| v - mean).collect();
            let c0 = centred.iter().map(|v| v * v).sum::<f64>();
            (c0 > 0.0).then_some((centred, c0))
        })
        .collect();
    if traces.is_empty() {
        return f64::NAN;
    }
    let k = traces.len() as f64;

    let mut tau = 1.0;
    for lag in 1..sweeps {
        let rho: f64 = traces
            .iter()
            .map(|(c, c0)| c[..sweeps - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0)
            .sum::<f64>()
            / k;
        tau += 2.0 * rho;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau
}

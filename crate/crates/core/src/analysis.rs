//! Corpus-level tables over per-hashtag fit summaries.
//!
//! Point estimates are posterior medians throughout.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::dynamics::ModelKind;
use crate::error::{Error, Result};
use crate::inference::summary::quantile;
use crate::inference::SummaryRow;

/// Rows from one model, grouped by location on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    model: ModelKind,
    rows: Vec<SummaryRow>,
}

impl CorpusSummary {
    pub fn new(rows: Vec<SummaryRow>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let model = first.model;
        if let Some(bad) = rows.iter().find(|r| r.model != model) {
            return Err(Error::Format(format!(
                "corpus mixes models {} and {}",
                model, bad.model
            )));
        }
        Ok(CorpusSummary { model, rows })
    }

    /// Split mixed rows into one summary per model, in model order.
    pub fn split_by_model(rows: Vec<SummaryRow>) -> Vec<CorpusSummary> {
        let mut groups: BTreeMap<&'static str, Vec<SummaryRow>> = BTreeMap::new();
        for row in rows {
            groups.entry(row.model.as_str()).or_default().push(row);
        }
        groups
            .into_values()
            .map(|rows| CorpusSummary::new(rows).expect("non-empty single-model group"))
            .collect()
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn rows(&self) -> &[SummaryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sub-corpora keyed by location; rows without one are keyed by `"all"`.
    pub fn by_location(&self) -> BTreeMap<String, CorpusSummary> {
        let mut groups: BTreeMap<String, Vec<SummaryRow>> = BTreeMap::new();
        for row in &self.rows {
            groups.entry(location_key(row.location()).to_string()).or_default().push(row.clone());
        }
        groups
            .into_iter()
            .map(|(k, rows)| (k, CorpusSummary { model: self.model, rows }))
            .collect()
    }

    pub fn location(&self, name: &str) -> Option<CorpusSummary> {
        self.by_location().remove(name)
    }

    pub fn r_medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r_med).collect()
    }
}

pub fn location_key(location: Option<&str>) -> &str {
    location.unwrap_or("all")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub hashtag: String,
    pub location: String,
    pub beta_med: f64,
    pub decay_med: f64,
    pub above_line: bool,
    /// Signed perpendicular distance to β = decay.
    pub distance: f64,
}

pub fn scatter_table(summary: &CorpusSummary) -> Vec<ScatterRow> {
    summary
        .rows
        .iter()
        .map(|r| ScatterRow {
            hashtag: r.hashtag.clone(),
            location: r.location.clone(),
            beta_med: r.beta_med,
            decay_med: r.decay_med,
            above_line: r.beta_med > r.decay_med,
            distance: (r.beta_med - r.decay_med) / std::f64::consts::SQRT_2,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Bin edges over `[lo, hi]`. Geometric edges are built in base 2 so that
/// power-of-two ranges land on exact edges.
fn bin_edges(lo: f64, hi: f64, bins: usize, log_scale: bool) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=bins)
        .map(|k| {
            if log_scale {
                lo * (k as f64 * (hi / lo).log2() / bins as f64).exp2()
            } else {
                lo + (hi - lo) * k as f64 / bins as f64
            }
        })
        .collect();
    edges[0] = lo;
    edges[bins] = hi;
    edges
}

/// Histogram of median ℛ. Bins are left-closed except the last, which also
/// holds the maximum. A degenerate range is widened so every row still lands
/// in a bin. Geometric binning needs all medians positive.
pub fn r_histogram(summary: &CorpusSummary, bins: usize, log_scale: bool) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let values = summary.r_medians();
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Format("non-finite reproduction number in summary".into()));
    }
    if log_scale && lo <= 0.0 {
        return Err(Error::Format(format!("geometric bins need positive values, got {lo}")));
    }
    if lo == hi {
        if log_scale {
            lo /= 2.0;
            hi *= 2.0;
        } else {
            lo -= 0.5;
            hi += 0.5;
        }
    }
    let edges = bin_edges(lo, hi, bins, log_scale);
    let mut counts = vec![0usize; bins];
    for v in values {
        // Number of interior edges at or below v.
        let k = edges[1..bins].partition_point(|&e| e <= v);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin { bin_lo: edges[k], bin_hi: edges[k + 1], count })
        .collect())
}

/// Share of rows (hashtags, not event volume) whose median ℛ exceeds `threshold`.
pub fn infectious_fraction(summary: &CorpusSummary, threshold: f64) -> f64 {
    if summary.rows.is_empty() {
        return 0.0;
    }
    let n = summary.rows.iter().filter(|r| r.r_med > threshold).count();
    n as f64 / summary.rows.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl GroupStats {
    fn of(values: &[f64]) -> Self {
        GroupStats {
            n: values.len(),
            median: quantile(values, 0.5),
            q25: quantile(values, 0.25),
            q75: quantile(values, 0.75),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub a: GroupStats,
    pub b: GroupStats,
    /// Mann–Whitney U of the first sample: pairs where a beats b, ties counting half.
    pub u: f64,
    /// Normal approximation with tie correction; 0 when the variance vanishes.
    pub z: f64,
}

/// Rank-sum comparison of median ℛ between two corpora.
pub fn compare_locations(a: &CorpusSummary, b: &CorpusSummary) -> Result<Comparison> {
    let (xa, xb) = (a.r_medians(), b.r_medians());
    if xa.is_empty() || xb.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (u, z) = mann_whitney(&xa, &xb);
    Ok(Comparison { a: GroupStats::of(&xa), b: GroupStats::of(&xb), u, z })
}

/// (U_a, z) using midranks for ties.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let n = pooled.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }

    let u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let total = n1 + n2;
    let var = n1 * n2 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let z = if var > 0.0 { (u - n1 * n2 / 2.0) / var.sqrt() } else { 0.0 };
    (u, z)
}

pub fn scatter_file_name(model: ModelKind) -> String {
    format!("scatter_{model}.csv")
}

pub fn histogram_file_name(model: ModelKind, location: &str) -> String {
    format!("rhist_{model}_{location}.csv")
}

pub fn compare_file_name(a: &str, b: &str) -> String {
    format!("compare_{a}_{b}.csv")
}

pub fn write_scatter_csv<W: Write>(rows: &[ScatterRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["hashtag", "location", "beta_med", "decay_med", "above_line", "distance"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for bin in bins {
        w.serialize(bin)?;
    }
    w.flush()?;
    Ok(())
}

/// Two rows per model (one per group), each carrying the shared rank-sum statistics.
pub fn write_comparison_csv<W: Write>(names: (&str, &str), comparisons: &[(ModelKind, Comparison)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "group", "n", "R_median", "R_q25", "R_q75", "R_iqr", "U", "z"])?;
    for (model, cmp) in comparisons {
        for (name, stats) in [(names.0, &cmp.a), (names.1, &cmp.b)] {
            w.write_record([
                model.to_string(),
                name.to_string(),
                stats.n.to_string(),
                stats.median.to_string(),
                stats.q25.to_string(),
                stats.q75.to_string(),
                stats.iqr().to_string(),
                cmp.u.to_string(),
                cmp.z.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(tag: &str, loc: &str, beta: f64, decay: f64, r: f64) -> SummaryRow {
        SummaryRow {
            hashtag: tag.into(),
            location: loc.into(),
            model: ModelKind::Sir,
            beta_med: beta,
            beta_lo: beta,
            beta_hi: beta,
            decay_med: decay,
            decay_lo: decay,
            decay_hi: decay,
            s0_med: 100.0,
            i0_med: 1.0,
            sigma_med: 1.0,
            r_med: r,
            r_lo: r,
            r_hi: r,
            accept_frac: 0.4,
            n_samples: 100,
        }
    }

    fn corpus(rs: &[f64]) -> CorpusSummary {
        CorpusSummary::new(rs.iter().enumerate().map(|(k, &r)| row(&format!("h{k}"), "", 1.0, 1.0, r)).collect())
            .unwrap()
    }

    #[test]
    fn scatter_geometry() {
        let c = CorpusSummary::new(vec![row("a", "", 1.0, 1.0, 1.0), row("b", "", 2.0, 1.0, 2.0)]).unwrap();
        let t = scatter_table(&c);
        assert!(!t[0].above_line);
        assert_eq!(t[0].distance, 0.0);
        assert!(t[1].above_line);
        assert!((t[1].distance - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn histogram_single_row() {
        for bins in [1, 3, 10] {
            for log in [false, true] {
                let h = r_histogram(&corpus(&[2.5]), bins, log).unwrap();
                assert_eq!(h.iter().filter(|b| b.count > 0).count(), 1);
                assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 1);
            }
        }
    }

    #[test]
    fn histogram_geometric_powers_of_two() {
        let h = r_histogram(&corpus(&[1.0, 2.0, 4.0, 8.0]), 3, true).unwrap();
        let edges: Vec<f64> = h.iter().map(|b| b.bin_lo).chain([h[2].bin_hi]).collect();
        assert_eq!(edges, vec![1.0, 2.0, 4.0, 8.0]);
        // Left-closed bins: [1,2) [2,4) [4,8].
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 1, 2]);
    }

    #[test]
    fn fraction_examples() {
        assert_eq!(infectious_fraction(&corpus(&[0.5, 0.5, 0.5]), 1.0), 0.0);
        assert_eq!(infectious_fraction(&corpus(&[0.5, 1.5, 3.0, 0.9]), 1.0), 0.5);
    }

    #[test]
    fn identical_samples_give_zero_z() {
        let c = corpus(&[1.0, 2.0, 2.0, 3.5, 7.0]);
        let cmp = compare_locations(&c, &c).unwrap();
        assert!(cmp.z.abs() < 1e-12);
        assert_eq!(cmp.u, 12.5);
    }

    #[test]
    fn complete_separation_hits_extreme_u() {
        let b: Vec<f64> = (0..20).map(|k| 1.0 + k as f64 * 0.1).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 10.0).collect();
        let cmp = compare_locations(&corpus(&a), &corpus(&b)).unwrap();
        assert_eq!(cmp.u, 400.0);
        assert!(cmp.z > 5.0);
    }

    #[test]
    fn all_tied_has_zero_variance() {
        let (u, z) = mann_whitney(&[3.0, 3.0], &[3.0, 3.0, 3.0]);
        assert_eq!(u, 3.0);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn groups_by_location() {
        let c = CorpusSummary::new(vec![row("a", "nyc", 1.0, 1.0, 1.0), row("b", "sf", 1.0, 1.0, 2.0), row("c", "", 1.0, 1.0, 2.0)])
            .unwrap();
        let groups = c.by_location();
        assert_eq!(groups.keys().collect::<Vec<_>>(), vec!["all", "nyc", "sf"]);
    }

    #[test]
    fn rejects_mixed_models() {
        let mut r = row("b", "", 1.0, 1.0, 1.0);
        r.model = ModelKind::Siri;
        assert!(CorpusSummary::new(vec![row("a", "", 1.0, 1.0, 1.0), r.clone()]).is_err());
        assert_eq!(CorpusSummary::split_by_model(vec![row("a", "", 1.0, 1.0, 1.0), r]).len(), 2);
    }
}

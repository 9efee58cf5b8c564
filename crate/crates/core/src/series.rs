//! Boxcar smoothing of event series and peak-centred occurrence extraction.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::EventSeries;

pub const DEFAULT_WINDOW: f64 = 1.0;
pub const DEFAULT_STEP: f64 = 0.25;
pub const DEFAULT_FRACTION: f64 = 0.01;

/// Event rate (events/hour) sampled on a uniform grid `start + i * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries {
    pub hashtag: String,
    pub location: Option<String>,
    pub start: f64,
    pub step: f64,
    pub window: f64,
    pub values: Vec<f64>,
}

impl IntensitySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start + index as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.time(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_hours,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.time(i), v)?;
        }
        Ok(())
    }
}

/// The stretch of an intensity series between the threshold crossings on
/// either side of its global maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Occurrence {
    pub hashtag: String,
    pub location: Option<String>,
    pub window: f64,
    pub step: f64,
    /// Index range of the slice within the parent grid.
    pub first_index: usize,
    pub last_index: usize,
    pub t1: f64,
    pub t2: f64,
    pub peak_time: f64,
    pub peak_value: f64,
    pub values: Vec<f64>,
    /// No threshold crossing was found before the peak; `t1` is the grid start.
    pub clamped_start: bool,
    /// No threshold crossing was found after the peak; `t2` is the grid end.
    pub clamped_end: bool,
}

impl Occurrence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absolute grid times of the slice.
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| self.t1 + i as f64 * self.step)
            .collect()
    }

    /// The slice as a standalone intensity series.
    pub fn as_series(&self) -> IntensitySeries {
        IntensitySeries {
            hashtag: self.hashtag.clone(),
            location: self.location.clone(),
            start: self.t1,
            step: self.step,
            window: self.window,
            values: self.values.clone(),
        }
    }

    pub fn is_clamped(&self) -> bool {
        self.clamped_start || self.clamped_end
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# hashtag={} t1={} t2={} window={}",
            self.hashtag, self.t1, self.t2, self.window
        )?;
        writeln!(out, "t_hours,value")?;
        for (t, v) in self.times().iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

/// Centred boxcar rate estimate: the value at grid time `t` is the number of
/// events in `[t - window/2, t + window/2]` divided by `window`.
pub fn smooth(series: &EventSeries, window: f64, step: f64) -> Result<IntensitySeries> {
    if !(window > 0.0 && step > 0.0 && step <= window && window.is_finite()) {
        return Err(Error::InvalidWindow { window, step });
    }
    let mut times = series.times.clone();
    times.sort_by(f64::total_cmp);
    let last = times.last().copied().unwrap_or(0.0);
    // Tolerance keeps a last event sitting exactly on a grid point from being lost to rounding.
    let count = ((last / step) + 1e-9).floor() as usize + 1;

    let half = window / 2.0;
    let mut values: Vec<f64> = (0..count)
        .map(|i| {
            let t = i as f64 * step;
            let lo = times.partition_point(|&x| x < t - half);
            let hi = times.partition_point(|&x| x <= t + half);
            (hi - lo) as f64 / window
        })
        .collect();
    if values.len() < 2 {
        values.push(0.0);
    }

    Ok(IntensitySeries {
        hashtag: series.hashtag.clone(),
        location: series.location.clone(),
        start: 0.0,
        step,
        window,
        values,
    })
}

/// Locate the global maximum (earliest on ties) and walk outwards to the first
/// grid points at or below `fraction * max`, clamping at the grid ends.
pub fn extract_occurrence(series: &IntensitySeries, fraction: f64) -> Result<Occurrence> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("extraction fraction {fraction} not in (0, 1)")));
    }
    let (peak_index, peak_value) = series
        .values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if !(peak_value > 0.0) {
        return Err(Error::AllZero(series.hashtag.clone()));
    }
    let threshold = fraction * peak_value;

    let before = series.values[..=peak_index].iter().rposition(|&v| v <= threshold);
    let after = series.values[peak_index..]
        .iter()
        .position(|&v| v <= threshold)
        .map(|offset| peak_index + offset);
    let first = before.unwrap_or(0);
    let last = after.unwrap_or(series.values.len() - 1);

    Ok(Occurrence {
        hashtag: series.hashtag.clone(),
        location: series.location.clone(),
        window: series.window,
        step: series.step,
        first_index: first,
        last_index: last,
        t1: series.time(first),
        t2: series.time(last),
        peak_time: series.time(peak_index),
        peak_value,
        values: series.values[first..=last].to_vec(),
        clamped_start: before.is_none(),
        clamped_end: after.is_none(),
    })
}

/// Convert the occurrence's rates to expected counts per window, paired with
/// grid times.
pub fn occurrence_counts(occ: &Occurrence) -> Vec<(f64, f64)> {
    occ.times()
        .into_iter()
        .zip(occ.values.iter().map(|v| v * occ.window))
        .collect()
}

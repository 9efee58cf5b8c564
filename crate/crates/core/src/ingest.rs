//! Offline event dumps: parsing, grouping into per-hashtag series, and replay.
//!
//! Two line formats are accepted. NDJSON objects carry `ts`, `tag` and an
//! optional `loc`; CSV files need a header with `timestamp` and `hashtag`
//! columns plus an optional `location` column. Timestamps are ISO-8601 and are
//! kept at millisecond resolution.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Ndjson,
    Csv,
}

impl InputFormat {
    /// Guess the format from a file extension; anything but `.csv` is NDJSON.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Ndjson,
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndjson" | "jsonl" | "json" => Ok(InputFormat::Ndjson),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::Format(format!("unknown input format '{other}'"))),
        }
    }
}

/// One observed hashtag occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub timestamp: DateTime<Utc>,
    pub hashtag: String,
    pub location: Option<String>,
}

impl EventRecord {
    /// Build a record, normalizing the tag. Returns `None` when the tag is empty
    /// after normalization.
    pub fn new(timestamp: DateTime<Utc>, tag: &str, location: Option<&str>) -> Option<Self> {
        let hashtag = normalize_hashtag(tag)?;
        let location = location
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned);
        Some(EventRecord {
            timestamp: truncate_to_millis(timestamp),
            hashtag,
            location,
        })
    }
}

/// Raw occurrence times of one (hashtag, location) pair, in hours after the
/// first event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    pub hashtag: String,
    pub location: Option<String>,
    pub times: Vec<f64>,
}

impl EventSeries {
    /// Build a series from arbitrary (unsorted, unshifted) times in hours.
    /// Returns `None` for an empty input.
    pub fn from_hours(hashtag: impl Into<String>, location: Option<String>, mut times: Vec<f64>) -> Option<Self> {
        if times.is_empty() {
            return None;
        }
        times.sort_by(f64::total_cmp);
        let origin = times[0];
        for t in &mut times {
            *t -= origin;
        }
        Some(EventSeries {
            hashtag: hashtag.into(),
            location,
            times,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Result of parsing one input stream.
#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<EventRecord>,
    pub malformed: usize,
}

/// Case-fold a tag and strip leading hash characters.
pub fn normalize_hashtag(tag: &str) -> Option<String> {
    let tag = tag.trim().trim_start_matches('#').trim();
    if tag.is_empty() {
        None
    } else {
        Some(tag.to_lowercase())
    }
}

fn truncate_to_millis(ts: DateTime<Utc>) -> DateTime<Utc> {
    let ms = ts.timestamp_millis();
    Utc.timestamp_millis_opt(ms).single().unwrap_or(ts)
}

/// Parse an ISO-8601 timestamp. Offsets are honored; naive times are UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(truncate_to_millis(dt.with_timezone(&Utc)));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(truncate_to_millis(Utc.from_utc_datetime(&naive)));
        }
    }
    None
}

/// Canonical timestamp rendering used by the NDJSON writer.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Deserialize)]
struct NdjsonIn {
    ts: String,
    tag: String,
    #[serde(default)]
    loc: Option<String>,
}

#[derive(Serialize)]
struct NdjsonOut<'a> {
    ts: String,
    tag: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    loc: Option<&'a str>,
}

#[derive(Deserialize)]
struct CsvIn {
    timestamp: String,
    hashtag: String,
    #[serde(default)]
    location: Option<String>,
}

/// Parse an event dump. Malformed lines are counted and skipped; the call only
/// fails when nothing valid remains or a CSV header lacks required columns.
pub fn parse_events<R: Read>(source: R, format: InputFormat) -> Result<ParseOutcome> {
    let outcome = match format {
        InputFormat::Ndjson => parse_ndjson(source)?,
        InputFormat::Csv => parse_csv(source)?,
    };
    if outcome.records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(outcome)
}

fn parse_ndjson<R: Read>(source: R) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for line in BufReader::new(source).lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                out.malformed += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str::<NdjsonIn>(&line).ok().and_then(|raw| {
            let ts = parse_timestamp(&raw.ts)?;
            EventRecord::new(ts, &raw.tag, raw.loc.as_deref())
        });
        match record {
            Some(r) => out.records.push(r),
            None => out.malformed += 1,
        }
    }
    Ok(out)
}

fn parse_csv<R: Read>(source: R) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    for required in ["timestamp", "hashtag"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Format(format!("csv header missing required column '{required}'")));
        }
    }
    let mut out = ParseOutcome::default();
    for row in reader.deserialize::<CsvIn>() {
        let record = row.ok().and_then(|raw| {
            let ts = parse_timestamp(&raw.timestamp)?;
            EventRecord::new(ts, &raw.hashtag, raw.location.as_deref())
        });
        match record {
            Some(r) => out.records.push(r),
            None => out.malformed += 1,
        }
    }
    Ok(out)
}

/// Write records as normalized NDJSON, one object per line, in the given order.
pub fn write_ndjson<W: Write>(records: &[EventRecord], mut sink: W) -> Result<()> {
    for r in records {
        let line = NdjsonOut {
            ts: format_timestamp(&r.timestamp),
            tag: &r.hashtag,
            loc: r.location.as_deref(),
        };
        serde_json::to_writer(&mut sink, &line).map_err(|e| Error::Format(e.to_string()))?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Total order used for merged output: timestamp, then tag, then location.
pub fn sort_records(records: &mut [EventRecord]) {
    records.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.hashtag.cmp(&b.hashtag))
            .then_with(|| a.location.cmp(&b.location))
    });
}

/// One series per distinct (hashtag, location), ordered by that key.
pub fn group_by_hashtag(records: &[EventRecord]) -> Vec<EventSeries> {
    let mut groups: BTreeMap<(&str, Option<&str>), Vec<i64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.hashtag.as_str(), r.location.as_deref()))
            .or_default()
            .push(r.timestamp.timestamp_millis());
    }
    groups
        .into_iter()
        .map(|((tag, loc), mut millis)| {
            millis.sort_unstable();
            let origin = millis[0];
            EventSeries {
                hashtag: tag.to_owned(),
                location: loc.map(str::to_owned),
                times: millis
                    .into_iter()
                    .map(|m| (m - origin) as f64 / MS_PER_HOUR)
                    .collect(),
            }
        })
        .collect()
}

/// Deliver records to `sink` in timestamp order, sleeping for the real gap
/// divided by `speedup`. An infinite speedup delivers without waiting.
pub fn replay<F>(records: &[EventRecord], speedup: f64, sink: F) -> usize
where
    F: FnMut(&EventRecord),
{
    replay_with(records, speedup, sink, std::thread::sleep)
}

/// [`replay`] with an injectable sleep, so the timing contract can be observed.
pub fn replay_with<F, S>(records: &[EventRecord], speedup: f64, mut sink: F, mut sleep: S) -> usize
where
    F: FnMut(&EventRecord),
    S: FnMut(Duration),
{
    assert!(speedup > 0.0, "replay speedup must be positive");
    let mut ordered: Vec<&EventRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.timestamp);

    let mut previous: Option<DateTime<Utc>> = None;
    for record in &ordered {
        if let Some(prev) = previous {
            if speedup.is_finite() {
                let gap_ms = (record.timestamp - prev).num_milliseconds().max(0) as f64;
                let wait = gap_ms / 1000.0 / speedup;
                if wait > 0.0 {
                    sleep(Duration::from_secs_f64(wait));
                }
            }
        }
        sink(record);
        previous = Some(record.timestamp);
    }
    ordered.len()
}

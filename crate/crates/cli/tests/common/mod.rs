#![allow(dead_code)]

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trendfit::ingest::write_ndjson;
use trendfit::synth::{default_origin, generate_event_times, to_records, SynthScenario};
use trendfit::{EventRecord, ModelKind, ParamVector};

pub fn trendfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trendfit")).args(args).output().expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// A few synthetic SIR hashtags with distinct truths, one hour cells.
pub fn synthetic_records(n: usize, location: Option<&str>) -> Vec<EventRecord> {
    let mut records = Vec::new();
    for k in 0..n {
        let gamma = 0.15 + 0.03 * k as f64;
        let truth = ParamVector::new((2.0 + 0.5 * k as f64) * gamma, gamma, 3000.0, 10.0, 20.0);
        let mut s = SynthScenario::new(ModelKind::Sir, truth, 60.0, 100 + k as u64);
        s.hashtag = format!("tag{k}");
        s.location = location.map(str::to_string);
        let times = generate_event_times(&s, 1.0).unwrap();
        records.extend(to_records(&s, &times, default_origin()));
    }
    records
}

pub fn write_events(dir: &Path, name: &str, records: &[EventRecord]) -> PathBuf {
    let path = dir.join(name);
    write_ndjson(records, File::create(&path).unwrap()).unwrap();
    path
}

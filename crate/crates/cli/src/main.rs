use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use trendfit::analysis::{
    compare_file_name, compare_locations, histogram_file_name, infectious_fraction, r_histogram, scatter_file_name,
    scatter_table, write_comparison_csv, write_histogram_csv, write_scatter_csv, CorpusSummary,
};
use trendfit::config::{default_scenario, parse_models, ConfigFile, PipelineConfig};
use trendfit::inference::{read_summary_csv, write_summary_csv, InitStrategy};
use trendfit::ingest::{group_by_hashtag, parse_events, sort_records, write_ndjson};
use trendfit::pipeline::{fit_corpus, write_skip_csv};
use trendfit::synth::{default_origin, generate_event_times, to_records};
use trendfit::{EventRecord, InputFormat};

#[derive(Parser)]
#[command(name = "trendfit", version, about = "Fit epidemic models to hashtag activity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge and normalize event files into one sorted NDJSON file.
    Ingest(IngestArgs),
    /// Fit every hashtag in an events file.
    Fit(FitArgs),
    /// Corpus tables from one or more summary files.
    Report(ReportArgs),
    /// Write a synthetic event stream with known parameters.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input files (NDJSON or CSV).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Format of each input, in order. Missing entries are inferred from the extension.
    #[arg(long = "format")]
    formats: Vec<InputFormat>,
    /// Output file [default: <out-dir>/events.ndjson].
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Settings shared by `fit` and `synth`. Flags override the config file.
#[derive(Args)]
struct Settings {
    /// Flat key = value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Smoothing window in hours.
    #[arg(long)]
    window: Option<f64>,
    /// Grid step in hours.
    #[arg(long)]
    step: Option<f64>,
    /// Peak fraction bounding the occurrence.
    #[arg(long)]
    fraction: Option<f64>,
    /// Comma-separated model list: sir, siri.
    #[arg(long)]
    models: Option<String>,
    /// Total walker-samples per fit.
    #[arg(long)]
    samples: Option<usize>,
    /// Fraction of sweeps discarded as burn-in.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    walkers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; hashtags are fitted in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Walker initialization: optimized or uniform.
    #[arg(long, value_parser = parse_init)]
    init: Option<InitStrategy>,
}

fn parse_init(s: &str) -> Result<InitStrategy, String> {
    match s {
        "optimized" => Ok(InitStrategy::Optimized),
        "uniform" => Ok(InitStrategy::Uniform),
        other => Err(format!("unknown init strategy '{other}'")),
    }
}

impl Settings {
    fn file(&self) -> anyhow::Result<ConfigFile> {
        match &self.config {
            Some(path) => Ok(ConfigFile::load(path)?),
            None => Ok(ConfigFile::default()),
        }
    }

    fn resolve(&self, file: &ConfigFile) -> anyhow::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        file.apply(&mut cfg)?;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.series.window, self.window);
        set(&mut cfg.series.step, self.step);
        set(&mut cfg.series.fraction, self.fraction);
        set(&mut cfg.fit.burn_in_fraction, self.burn_in);
        if let Some(models) = &self.models {
            cfg.models = parse_models(models.split(','))?;
        }
        if let Some(n) = self.samples {
            cfg.fit.total_samples = n;
        }
        if self.walkers.is_some() {
            cfg.fit.walkers = self.walkers;
        }
        if let Some(seed) = self.seed {
            cfg.fit.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(init) = self.init {
            cfg.fit.init = init;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Events file.
    events: PathBuf,
    /// Events file format [default: from extension].
    #[arg(long)]
    format: Option<InputFormat>,
    /// Also write post-burn-in chains under <out-dir>/chains/.
    #[arg(long)]
    chains: bool,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct ReportArgs {
    /// Summary CSV files written by `fit`.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    /// ℛ cutoff for the infectious fraction.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Equal-width histogram bins instead of geometric ones.
    #[arg(long)]
    linear_bins: bool,
    /// Compare two locations.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<String>>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// γ for SIR, ν for SIRI.
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    i0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Hours simulated.
    #[arg(long)]
    duration: Option<f64>,
    /// poisson or gaussian.
    #[arg(long)]
    emission: Option<String>,
    #[arg(long)]
    hashtag: Option<String>,
    #[arg(long)]
    location: Option<String>,
    /// Output file [default: <out-dir>/synth.ndjson].
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

/// A failure with its exit code: 1 for "nothing usable came out", 2 for bad input.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn no_results(msg: String) -> Failure {
    Failure { code: 1, error: anyhow!(msg) }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Report(args) => cmd_report(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_records(path: &Path, format: InputFormat) -> anyhow::Result<(Vec<EventRecord>, usize)> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let outcome = parse_events(BufReader::new(file), format).with_context(|| format!("{}", path.display()))?;
    Ok((outcome.records, outcome.malformed))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn report_malformed(n: usize) {
    if n > 0 {
        eprintln!("skipped {n} malformed lines");
    }
}

fn cmd_ingest(args: IngestArgs) -> CmdResult {
    if args.formats.len() > args.inputs.len() {
        return Err(input_error(anyhow!("more --format flags than input files")));
    }
    let mut records = Vec::new();
    let mut malformed = 0;
    for (k, path) in args.inputs.iter().enumerate() {
        let format = args.formats.get(k).copied().unwrap_or_else(|| InputFormat::from_path(path));
        let (mut recs, bad) = read_records(path, format).map_err(input_error)?;
        records.append(&mut recs);
        malformed += bad;
    }
    report_malformed(malformed);
    sort_records(&mut records);
    let hashtags = group_by_hashtag(&records).len();

    let output = args.output.unwrap_or_else(|| args.out_dir.join("events.ndjson"));
    let mut out = create(&output).map_err(input_error)?;
    write_ndjson(&records, &mut out).map_err(input_error)?;
    out.flush().map_err(input_error)?;
    println!("records={} hashtags={} malformed={}", records.len(), hashtags, malformed);
    Ok(())
}

fn cmd_fit(args: FitArgs) -> CmdResult {
    let file = args.settings.file().map_err(input_error)?;
    let config = args.settings.resolve(&file).map_err(input_error)?;
    let format = args.format.unwrap_or_else(|| InputFormat::from_path(&args.events));
    let (records, malformed) = read_records(&args.events, format).map_err(input_error)?;
    report_malformed(malformed);
    let corpus = group_by_hashtag(&records);

    eprintln!(
        "fitting {} series x {} model(s) on {} worker(s)",
        corpus.len(),
        config.models.len(),
        config.jobs
    );
    let progress = |done: usize, total: usize| {
        if done == total || done.is_multiple_of(10) {
            eprintln!("  {done}/{total} fits done");
        }
    };
    let out = fit_corpus(&corpus, &config, progress).map_err(input_error)?;

    let dir = &config.out_dir;
    let write = || -> anyhow::Result<()> {
        let mut summary = create(&dir.join("summary.csv"))?;
        write_summary_csv(&out.summary_rows(), &mut summary)?;
        summary.flush()?;
        let mut skipped = create(&dir.join("skipped.csv"))?;
        write_skip_csv(&out.skipped, &mut skipped)?;
        skipped.flush()?;
        if args.chains {
            for r in &out.results {
                let loc = r.location.as_deref().unwrap_or("all");
                let name = format!("{}_{}_{}.csv", r.hashtag, loc, r.kind);
                let mut w = create(&dir.join("chains").join(name))?;
                r.write_chain_csv(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    };
    write().map_err(input_error)?;

    for r in out.results.iter().filter(|r| r.diagnostics.low_information) {
        let loc = r.location.as_deref().unwrap_or("all");
        eprintln!("low information: {} [{}] {}: burst clamped to the series boundary", r.hashtag, loc, r.kind);
    }
    for s in &out.skipped {
        eprintln!("skipped {} [{}] {}: {}", s.hashtag, s.location, s.model, s.reason);
    }
    eprintln!("{} fits written, {} skipped", out.results.len(), out.skipped.len());
    if out.results.is_empty() {
        return Err(no_results("no fit succeeded".into()));
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CmdResult {
    let mut rows = Vec::new();
    for path in &args.summaries {
        let file = File::open(path)
            .with_context(|| format!("cannot read {}", path.display()))
            .map_err(input_error)?;
        let mut part = read_summary_csv(BufReader::new(file))
            .with_context(|| format!("{}", path.display()))
            .map_err(input_error)?;
        rows.append(&mut part);
    }
    if rows.is_empty() {
        return Err(no_results("summaries contain no rows".into()));
    }

    let dir = &args.out_dir;
    let mut comparisons = Vec::new();
    for corpus in CorpusSummary::split_by_model(rows) {
        let model = corpus.model();
        let emit = || -> anyhow::Result<()> {
            let mut w = create(&dir.join(scatter_file_name(model)))?;
            write_scatter_csv(&scatter_table(&corpus), &mut w)?;
            w.flush()?;
            for (loc, group) in corpus.by_location() {
                let log_scale = !args.linear_bins && group.r_medians().iter().all(|&r| r > 0.0);
                let bins = r_histogram(&group, args.bins, log_scale)?;
                let mut w = create(&dir.join(histogram_file_name(model, &loc)))?;
                write_histogram_csv(&bins, &mut w)?;
                w.flush()?;
            }
            Ok(())
        };
        emit().map_err(input_error)?;

        println!(
            "infectious_fraction model={} threshold={} hashtags={} fraction={:.4}",
            model,
            args.threshold,
            corpus.len(),
            infectious_fraction(&corpus, args.threshold)
        );

        if let Some(names) = &args.compare {
            let (a, b) = (&names[0], &names[1]);
            match (corpus.location(a), corpus.location(b)) {
                (Some(ga), Some(gb)) => comparisons.push((model, compare_locations(&ga, &gb).map_err(input_error)?)),
                _ => eprintln!("model {model}: location {a} or {b} has no rows, comparison skipped"),
            }
        }
    }

    if let Some(names) = &args.compare {
        if comparisons.is_empty() {
            return Err(no_results(format!("no rows for both {} and {}", names[0], names[1])));
        }
        let write = || -> anyhow::Result<()> {
            let mut w = create(&dir.join(compare_file_name(&names[0], &names[1])))?;
            write_comparison_csv((&names[0], &names[1]), &comparisons, &mut w)?;
            w.flush()?;
            Ok(())
        };
        write().map_err(input_error)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let file = args.settings.file().map_err(input_error)?;
    let config = args.settings.resolve(&file).map_err(input_error)?;
    let mut scenario = file.scenario(default_scenario()).map_err(input_error)?;
    scenario.window = config.series.window;
    if let Some(seed) = args.settings.seed {
        scenario.seed = seed;
    }
    if let Some(m) = &args.model {
        scenario.kind = m.parse().map_err(input_error)?;
    }
    if let Some(e) = &args.emission {
        scenario.emission = e.parse().map_err(input_error)?;
    }
    let t = &mut scenario.truth;
    for (slot, v) in [
        (&mut t.beta, args.beta),
        (&mut t.decay, args.decay),
        (&mut t.s0, args.s0),
        (&mut t.i0, args.i0),
        (&mut t.sigma, args.sigma),
        (&mut scenario.duration, args.duration),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(h) = args.hashtag {
        scenario.hashtag = h;
    }
    if args.location.is_some() {
        scenario.location = args.location;
    }

    // Events are emitted on cells one smoothing window wide.
    let times = generate_event_times(&scenario, config.series.window).map_err(input_error)?;
    let records = to_records(&scenario, &times, default_origin());
    let output = args.output.unwrap_or_else(|| config.out_dir.join("synth.ndjson"));
    let write = || -> anyhow::Result<()> {
        let mut w = create(&output)?;
        write_ndjson(&records, &mut w)?;
        w.flush()?;
        Ok(())
    };
    write().map_err(input_error)?;
    println!(
        "events={} model={} R={:.4} output={}",
        records.len(),
        scenario.kind,
        scenario.truth_r(),
        output.display()
    );
    Ok(())
}

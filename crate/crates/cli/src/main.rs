//! `tcri`: ingest best tracks, extract RI windows, train and evaluate Elman
//! detectors, and run repeated-seed experiments.
//!
//! Exit codes: 0 success, 1 I/O or configuration, 2 parse, 3 extraction, 4 training.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tcri::besttrack::{
    export_csv, filter_tracks, season_counts, Basin, CycloneTrack, ErrorPolicy, YearRange,
};
use tcri::bptt::{train, TrainConfig};
use tcri::elman::{ElmanNetwork, NetworkOptions, Topology};
use tcri::experiment::{
    apply_network_key, apply_train_key, load_tracks, parse_key_values, prepare_dataset,
    run_experiment, ExperimentSpec, TrackFormat,
};
use tcri::extraction::{
    duration_ri_correlation, duration_ri_report, format_class_table, read_windows_csv,
    write_report_csv, write_windows_csv, ClassCounts, Strategy,
};
use tcri::metrics::{accuracy, all_negative_accuracy, auc, confusion, roc};
use tcri::{reference, Stage};

#[derive(Parser)]
#[command(
    name = "tcri",
    version,
    about = "Rapid-intensification detection with Elman networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasinArg {
    Sp,
    Si,
}

impl From<BasinArg> for Basin {
    fn from(b: BasinArg) -> Basin {
        match b {
            BasinArg::Sp => Basin::SouthPacific,
            BasinArg::Si => Basin::SouthIndian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::One => Strategy::I,
            StrategyArg::Two => Strategy::II,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Bdeck,
    Csv,
}

impl From<FormatArg> for TrackFormat {
    fn from(f: FormatArg) -> TrackFormat {
        match f {
            FormatArg::Bdeck => TrackFormat::Bdeck,
            FormatArg::Csv => TrackFormat::Csv,
        }
    }
}

/// Flags shared by every subcommand; each uses the ones that apply to it.
#[derive(Args)]
struct Shared {
    /// Basin preset (genesis box, Nov–Apr seasons, default year splits).
    #[arg(long, value_enum)]
    basin: Option<BasinArg>,
    /// RI strategy: 1 = 30 kt rise in 24 h, 2 = 10 kt.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Seed for weight initialization and shuffling (base seed for experiments).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key/value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Shared {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn strategy(&self) -> Strategy {
        self.strategy.map(Strategy::from).unwrap_or(Strategy::I)
    }

    fn basin(&self) -> Option<Basin> {
        self.basin.map(Basin::from)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse best-track files into the simplified track CSV.
    Ingest {
        /// b-deck file, directory of b-deck files, or track CSV.
        input: PathBuf,
        #[arg(long, value_enum, default_value = "bdeck")]
        format: FormatArg,
        /// Season years to keep, e.g. 1980-2013 (needs --basin).
        #[arg(long)]
        years: Option<YearRange>,
        /// Stop at the first malformed record instead of skipping it.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Label RI windows and split them into normalized train/test sets.
    Extract {
        /// Track CSV produced by `ingest`.
        tracks: PathBuf,
        #[arg(long)]
        train_years: Option<YearRange>,
        #[arg(long)]
        test_years: Option<YearRange>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Train one network on a window CSV.
    Train {
        /// Normalized training windows.
        windows: PathBuf,
        /// Hidden units (defaults to the strategy's size).
        #[arg(long)]
        hidden: Option<usize>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Score a trained network on a window CSV.
    Eval {
        /// Network JSON produced by `train`.
        #[arg(long)]
        network: PathBuf,
        /// Normalized test windows.
        windows: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Keep at most this many ROC thresholds.
        #[arg(long)]
        roc_thresholds: Option<usize>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Per-cyclone duration vs RI-count report.
    Report {
        /// Track CSV produced by `ingest`.
        tracks: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
    /// Run the repeated-seed protocol described by `--config`.
    Experiment {
        #[command(flatten)]
        shared: Shared,
    },
}

fn policy(strict: bool) -> ErrorPolicy {
    if strict {
        ErrorPolicy::Abort
    } else {
        ErrorPolicy::SkipAndWarn
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_csv_tracks(path: &Path) -> Result<Vec<CycloneTrack>> {
    let parsed = load_tracks(path, TrackFormat::Csv, ErrorPolicy::SkipAndWarn)
        .with_context(|| format!("loading {}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.tracks)
}

fn ingest(
    input: &Path,
    format: FormatArg,
    years: Option<YearRange>,
    strict: bool,
    shared: &Shared,
) -> Result<()> {
    let parsed = load_tracks(input, format.into(), policy(strict))
        .with_context(|| format!("loading {}", input.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let tracks = match (shared.basin(), years) {
        (Some(b), years) => {
            let mut filter = b.preset_filter().expect("sp and si have presets");
            if let Some(y) = years {
                filter = filter.with_years(y);
            }
            filter_tracks(&parsed.tracks, &filter)
        }
        (None, Some(_)) => {
            return Err(tcri::Error::Config("--years requires --basin".into()).into())
        }
        (None, None) => parsed.tracks,
    };
    if tracks.is_empty() {
        eprintln!("warning: no cyclones found in {}", input.display());
    }
    let dir = shared.out_dir();
    create_dir(&dir)?;
    write(&dir.join("tracks.csv"), &export_csv(&tracks)?)?;
    println!("cyclones: {}", tracks.len());
    for (season, n) in season_counts(&tracks) {
        println!("  season {season}: {n}");
    }
    Ok(())
}

fn year_ranges(
    basin: Basin,
    train: Option<YearRange>,
    test: Option<YearRange>,
) -> Result<(YearRange, YearRange)> {
    let defaults = reference::default_years(basin).map(|((a, b), (c, d))| {
        (
            YearRange { start: a, end: b },
            YearRange { start: c, end: d },
        )
    });
    match (train, test, defaults) {
        (Some(tr), Some(te), _) => Ok((tr, te)),
        (tr, te, Some((dtr, dte))) => Ok((tr.unwrap_or(dtr), te.unwrap_or(dte))),
        _ => Err(tcri::Error::Config(
            "--train-years and --test-years are required without --basin".into(),
        )
        .into()),
    }
}

fn extract(
    tracks: &Path,
    train_years: Option<YearRange>,
    test_years: Option<YearRange>,
    shared: &Shared,
) -> Result<()> {
    let basin = shared.basin().unwrap_or(Basin::Other);
    let strategy = shared.strategy();
    let (train_years, test_years) = year_ranges(basin, train_years, test_years)?;
    let all = load_csv_tracks(tracks)?;
    let data = prepare_dataset(
        &all,
        basin,
        strategy.threshold_kt(),
        train_years,
        test_years,
    )?;
    let dir = shared.out_dir();
    create_dir(&dir)?;
    write(
        &dir.join("train_windows.csv"),
        &write_windows_csv(&data.train)?,
    )?;
    write(
        &dir.join("test_windows.csv"),
        &write_windows_csv(&data.test)?,
    )?;
    write(
        &dir.join("bounds.json"),
        &serde_json::to_string_pretty(&data.bounds)?,
    )?;
    let mut selected = data.train_tracks.clone();
    selected.extend(data.test_tracks.iter().cloned());
    write(
        &dir.join("report.csv"),
        &write_report_csv(&duration_ri_report(&selected, strategy.threshold_kt()))?,
    )?;
    println!(
        "Strategy {strategy}: {} training cyclones ({train_years}), {} testing cyclones ({test_years})",
        data.train_tracks.len(),
        data.test_tracks.len()
    );
    print!(
        "{}",
        format_class_table(&basin.to_string(), data.train_counts(), data.test_counts())
    );
    Ok(())
}

/// Training and network keys from a config file; experiment-only keys are ignored.
fn train_settings(config: Option<&Path>) -> Result<(TrainConfig, NetworkOptions, Option<usize>)> {
    let mut cfg = TrainConfig::default();
    let mut options = NetworkOptions::default();
    let mut hidden = None;
    if let Some(path) = config {
        for (key, value) in parse_key_values(&read(path)?)? {
            if key == "hidden" {
                hidden = Some(value.parse().map_err(|_| {
                    tcri::Error::Config(format!("bad value for `hidden`: `{value}`"))
                })?);
            } else if !apply_train_key(&mut cfg, &key, &value)?
                && !apply_network_key(&mut options, &key, &value)?
            {
                eprintln!("note: `{key}` is not a training setting, ignored");
            }
        }
    }
    Ok((cfg, options, hidden))
}

fn train_cmd(windows: &Path, hidden: Option<usize>, shared: &Shared) -> Result<()> {
    let (mut cfg, options, config_hidden) = train_settings(shared.config.as_deref())?;
    let data = read_windows_csv(&read(windows)?)?;
    let seed = shared.seed.unwrap_or(1);
    cfg.shuffle_seed = seed;
    let hidden = hidden
        .or(config_hidden)
        .unwrap_or(shared.strategy().hidden_units());
    let net = ElmanNetwork::init(Topology::detector(hidden), options, seed)?;
    let (net, history) = train(net, &data, &cfg)?;
    let dir = shared.out_dir();
    create_dir(&dir)?;
    write(&dir.join("network.json"), &net.to_json()?)?;
    write(&dir.join("history.csv"), &history.to_csv())?;
    let counts = ClassCounts::of(&data);
    println!(
        "trained 1-{hidden}-1 on {} windows ({} positive) for {} epochs ({:?}), final SSE {:.6}",
        counts.total(),
        counts.positive,
        history.epochs(),
        history.stop_reason,
        history.sse.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval(
    network: &Path,
    windows: &Path,
    threshold: f64,
    roc_thresholds: Option<usize>,
    shared: &Shared,
) -> Result<()> {
    let net = ElmanNetwork::from_json(&read(network)?)?;
    let data = read_windows_csv(&read(windows)?)?;
    let cm = confusion(&net, &data, threshold)?;
    let acc = accuracy(&cm)?;
    let counts = ClassCounts::of(&data);
    let baseline = all_negative_accuracy(counts.positive, counts.total())?;
    let dir = shared.out_dir();
    create_dir(&dir)?;
    write(&dir.join("confusion.csv"), &cm.to_csv())?;
    let table = cm.render_table("Confusion Matrix");
    write(&dir.join("confusion.txt"), &table)?;
    print!("{table}");
    println!("accuracy: {acc:.3}%  (all-negative baseline {baseline:.3}%)");
    match roc(&net, &data, roc_thresholds) {
        Ok(curve) => {
            write(&dir.join("roc.csv"), &curve.to_csv())?;
            println!("ROC AUC: {:.4}", auc(&curve));
        }
        Err(tcri::Error::SingleClass(missing)) => {
            eprintln!("warning: no {missing} windows, ROC not written");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn report(tracks: &Path, shared: &Shared) -> Result<()> {
    let mut all = load_csv_tracks(tracks)?;
    if let Some(filter) = shared.basin().and_then(Basin::preset_filter) {
        all = filter_tracks(&all, &filter);
    }
    let rows = duration_ri_report(&all, shared.strategy().threshold_kt());
    let dir = shared.out_dir();
    create_dir(&dir)?;
    write(&dir.join("report.csv"), &write_report_csv(&rows)?)?;
    println!("cyclones: {}", rows.len());
    match duration_ri_correlation(&rows) {
        Some(r) => println!("duration vs RI count correlation: {r:.4}"),
        None => println!("duration vs RI count correlation: undefined"),
    }
    Ok(())
}

fn experiment(shared: &Shared) -> Result<()> {
    let path = shared
        .config
        .as_deref()
        .ok_or_else(|| tcri::Error::Config("experiment needs --config FILE".into()))?;
    let mut map = parse_key_values(&read(path)?)?;
    if let Some(b) = shared.basin() {
        map.insert("basin".into(), b.code().to_lowercase());
    }
    if let Some(s) = shared.strategy {
        map.insert("strategy".into(), Strategy::from(s).to_string());
    }
    if let Some(seed) = shared.seed {
        map.insert("base_seed".into(), seed.to_string());
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut spec = ExperimentSpec::from_map(&map, base)?;
    if let Some(out) = &shared.out {
        spec.out_dir = out.clone();
    }
    let parsed = load_tracks(&spec.tracks, spec.format, ErrorPolicy::SkipAndWarn)
        .with_context(|| format!("loading {}", spec.tracks.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let data = prepare_dataset(
        &parsed.tracks,
        spec.basin,
        spec.strategy.threshold_kt(),
        spec.train_years,
        spec.test_years,
    )?;
    let report = run_experiment(&spec, &data)?;
    report.write_to(&spec.out_dir)?;
    print!("{}", report.summary_text());
    println!("results written to {}", spec.out_dir.display());
    match report.failure_error() {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            input,
            format,
            years,
            strict,
            shared,
        } => ingest(input, *format, *years, *strict, shared),
        Command::Extract {
            tracks,
            train_years,
            test_years,
            shared,
        } => extract(tracks, *train_years, *test_years, shared),
        Command::Train {
            windows,
            hidden,
            shared,
        } => train_cmd(windows, *hidden, shared),
        Command::Eval {
            network,
            windows,
            threshold,
            roc_thresholds,
            shared,
        } => eval(network, windows, *threshold, *roc_thresholds, shared),
        Command::Report { tracks, shared } => report(tracks, shared),
        Command::Experiment { shared } => experiment(shared),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let stage = err
        .chain()
        .find_map(|e| e.downcast_ref::<tcri::Error>())
        .map(tcri::Error::stage);
    match stage {
        Some(Stage::Parse) => 2,
        Some(Stage::Extraction) => 3,
        Some(Stage::Training) => 4,
        Some(Stage::Io) | None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! Repeated-run experiment protocol: prepare a basin/strategy dataset, train
//! `n_runs` independently seeded networks, and summarize test performance.
//!
//! Experiment files are flat `key = value` text; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::besttrack::{
    filter_tracks, parse_atcf_bdeck, parse_track_csv, split_by_years, Basin, CycloneTrack,
    ErrorPolicy, Parsed, YearRange,
};
use crate::bptt::{train, TrainConfig, TrainHistory};
use crate::elman::{ElmanNetwork, NetworkOptions, Topology};
use crate::error::{Error, Result};
use crate::extraction::{
    extract_all, fit_bounds, format_class_table, normalize_all, ClassCounts, LabeledWindow,
    NormalizationBounds, Strategy,
};
use crate::metrics::{
    accuracy, aggregate_runs, all_negative_accuracy, auc, best_index, confusion, roc,
    ConfusionMatrix, RocCurve, RunSummary,
};
use crate::reference;

/// Parses `key = value` lines. Blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Record {
            line: idx + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Record {
                line: idx + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for `{key}`: `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean for `{key}`: `{value}`"))),
    }
}

/// Training keys accepted in configuration files.
pub const TRAIN_KEYS: [&str; 8] = [
    "learning_rate",
    "max_epochs",
    "shuffle_seed",
    "target_pos",
    "target_neg",
    "stop_tolerance",
    "patience",
    "positive_weight",
];

/// Overrides `config` with any training keys present in `values`; returns
/// whether the key was recognized.
pub fn apply_train_key(config: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "learning_rate" => config.learning_rate = parse_value(key, value)?,
        "max_epochs" => config.max_epochs = parse_value(key, value)?,
        "shuffle_seed" => config.shuffle_seed = parse_value(key, value)?,
        "target_pos" => config.target_pos = parse_value(key, value)?,
        "target_neg" => config.target_neg = parse_value(key, value)?,
        "stop_tolerance" => config.stop_tolerance = parse_value(key, value)?,
        "patience" => config.patience = parse_value(key, value)?,
        "positive_weight" => config.positive_weight = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn apply_network_key(options: &mut NetworkOptions, key: &str, value: &str) -> Result<bool> {
    match key {
        "use_biases" => options.use_biases = parse_bool(key, value)?,
        "initial_context" => options.initial_context = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackFormat {
    Csv,
    Bdeck,
}

impl FromStr for TrackFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(TrackFormat::Csv),
            "bdeck" | "atcf" => Ok(TrackFormat::Bdeck),
            other => Err(Error::Config(format!("unknown track format `{other}`"))),
        }
    }
}

/// Reads one file, or every regular file of a directory in name order.
pub fn load_tracks(path: &Path, format: TrackFormat, policy: ErrorPolicy) -> Result<Parsed> {
    let text = if path.is_dir() {
        if format == TrackFormat::Csv {
            return Err(Error::Config(
                "a directory input is only supported for b-deck files".into(),
            ));
        }
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut all = String::new();
        for f in files {
            all.push_str(&fs::read_to_string(&f)?);
            if !all.ends_with('\n') {
                all.push('\n');
            }
        }
        all
    } else {
        fs::read_to_string(path)?
    };
    match format {
        TrackFormat::Csv => parse_track_csv(&text, policy),
        TrackFormat::Bdeck => parse_atcf_bdeck(&text, policy),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub basin: Basin,
    pub strategy: Strategy,
    pub tracks: PathBuf,
    pub format: TrackFormat,
    pub train_years: YearRange,
    pub test_years: YearRange,
    pub n_runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Hidden units; defaults to the strategy's size.
    pub hidden: usize,
    pub network: NetworkOptions,
    pub train: TrainConfig,
    pub decision_threshold: f64,
    /// Thresholds kept on the ROC curve; `None` keeps every distinct score.
    pub roc_thresholds: Option<usize>,
}

impl ExperimentSpec {
    /// Builds a spec from parsed key/value pairs. Relative paths resolve against `base_dir`.
    pub fn from_map(values: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        let get = |k: &str| values.get(k).map(String::as_str);
        let basin: Basin = get("basin")
            .ok_or_else(|| Error::Config("missing `basin`".into()))?
            .parse()?;
        let strategy: Strategy = get("strategy")
            .ok_or_else(|| Error::Config("missing `strategy`".into()))?
            .parse()?;
        let tracks =
            base_dir.join(get("tracks").ok_or_else(|| Error::Config("missing `tracks`".into()))?);
        let (default_train, default_test) = reference::default_years(basin)
            .map(|(a, b)| {
                (
                    YearRange {
                        start: a.0,
                        end: a.1,
                    },
                    YearRange {
                        start: b.0,
                        end: b.1,
                    },
                )
            })
            .unzip();
        let train_years = match get("train_years") {
            Some(v) => v.parse()?,
            None => default_train.ok_or_else(|| Error::Config("missing `train_years`".into()))?,
        };
        let test_years = match get("test_years") {
            Some(v) => v.parse()?,
            None => default_test.ok_or_else(|| Error::Config("missing `test_years`".into()))?,
        };

        let mut spec = ExperimentSpec {
            basin,
            strategy,
            tracks,
            format: TrackFormat::Csv,
            train_years,
            test_years,
            n_runs: 30,
            base_seed: 1,
            out_dir: base_dir.join("results"),
            hidden: strategy.hidden_units(),
            network: NetworkOptions::default(),
            train: TrainConfig::default(),
            decision_threshold: 0.5,
            roc_thresholds: None,
        };
        for (key, value) in values {
            match key.as_str() {
                "basin" | "strategy" | "tracks" | "train_years" | "test_years" => {}
                "format" => spec.format = value.parse()?,
                "n_runs" => spec.n_runs = parse_value(key, value)?,
                "base_seed" => spec.base_seed = parse_value(key, value)?,
                "out" => spec.out_dir = base_dir.join(value),
                "hidden" => spec.hidden = parse_value(key, value)?,
                "threshold" => spec.decision_threshold = parse_value(key, value)?,
                "roc_thresholds" => spec.roc_thresholds = Some(parse_value(key, value)?),
                "shuffle_seed" => {
                    return Err(Error::Config(
                        "`shuffle_seed` is derived from base_seed in experiments".into(),
                    ))
                }
                k => {
                    if !apply_train_key(&mut spec.train, k, value)?
                        && !apply_network_key(&mut spec.network, k, value)?
                    {
                        return Err(Error::Config(format!("unknown key `{k}`")));
                    }
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_map(&parse_key_values(&text)?, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.train_years.overlaps(&self.test_years) {
            return Err(Error::OverlappingYears {
                train_start: self.train_years.start,
                train_end: self.train_years.end,
                test_start: self.test_years.start,
                test_end: self.test_years.end,
            });
        }
        self.train.validate()?;
        self.topology().validate()
    }

    pub fn topology(&self) -> Topology {
        Topology::detector(self.hidden)
    }
}

/// Normalized train/test windows for one basin and strategy.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train_tracks: Vec<CycloneTrack>,
    pub test_tracks: Vec<CycloneTrack>,
    pub train: Vec<LabeledWindow>,
    pub test: Vec<LabeledWindow>,
    pub bounds: NormalizationBounds,
}

impl Dataset {
    pub fn train_counts(&self) -> ClassCounts {
        ClassCounts::of(&self.train)
    }

    pub fn test_counts(&self) -> ClassCounts {
        ClassCounts::of(&self.test)
    }
}

/// Applies the basin box and Nov–Apr season filter, splits by season year,
/// extracts windows and normalizes both sets with bounds fitted on training data.
/// Tracks of basin `Other` skip the geographic filter.
pub fn prepare_dataset(
    tracks: &[CycloneTrack],
    basin: Basin,
    threshold_kt: u16,
    train_years: YearRange,
    test_years: YearRange,
) -> Result<Dataset> {
    let span = YearRange::new(
        train_years.start.min(test_years.start),
        train_years.end.max(test_years.end),
    )?;
    let selected = match basin.preset_filter() {
        Some(f) => filter_tracks(tracks, &f.with_years(span)),
        None => tracks.to_vec(),
    };
    let (train_tracks, test_tracks) = split_by_years(&selected, train_years, test_years)?;
    let raw_train = extract_all(&train_tracks, threshold_kt);
    let raw_test = extract_all(&test_tracks, threshold_kt);
    let bounds = fit_bounds(&raw_train)?;
    Ok(Dataset {
        train: normalize_all(&raw_train, &bounds),
        test: normalize_all(&raw_test, &bounds),
        train_tracks,
        test_tracks,
        bounds,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub network: ElmanNetwork,
    pub history: TrainHistory,
    pub test_confusion: ConfusionMatrix,
    pub test_accuracy: f64,
}

/// Trains one network (weights and shuffling both seeded by `seed`) and scores it on the test set.
pub fn run_once(
    dataset: &Dataset,
    topology: Topology,
    options: NetworkOptions,
    config: &TrainConfig,
    decision_threshold: f64,
    run: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let net = ElmanNetwork::init(topology, options, seed)?;
    let config = TrainConfig {
        shuffle_seed: seed,
        ..config.clone()
    };
    let (network, history) = train(net, &dataset.train, &config)?;
    let test_confusion = confusion(&network, &dataset.test, decision_threshold)?;
    Ok(RunOutcome {
        run,
        seed,
        network,
        history,
        test_accuracy: accuracy(&test_confusion)?,
        test_confusion,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub basin: Basin,
    pub strategy: Strategy,
    pub train_counts: ClassCounts,
    pub test_counts: ClassCounts,
    pub train_cyclones: usize,
    pub test_cyclones: usize,
    pub bounds: NormalizationBounds,
    /// Successful runs in run order.
    pub runs: Vec<RunOutcome>,
    pub failures: Vec<(usize, String)>,
    /// Present with two or more successful runs.
    pub summary: Option<RunSummary>,
    /// Index into `runs`.
    pub best: Option<usize>,
    pub roc: Option<RocCurve>,
    pub roc_note: Option<String>,
    pub baseline_accuracy: f64,
}

/// Runs `n_runs` seeds (`base_seed + i`) in parallel over a prepared dataset.
pub fn run_experiment(spec: &ExperimentSpec, dataset: &Dataset) -> Result<ExperimentReport> {
    spec.validate()?;
    if dataset.test.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let topology = spec.topology();
    let results: Vec<Result<RunOutcome>> = (0..spec.n_runs)
        .into_par_iter()
        .map(|i| {
            run_once(
                dataset,
                topology,
                spec.network,
                &spec.train,
                spec.decision_threshold,
                i,
                spec.base_seed + i as u64,
            )
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(outcome) => runs.push(outcome),
            Err(e) => failures.push((i, e.to_string())),
        }
    }

    let accuracies: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let summary = aggregate_runs(&accuracies).ok();
    let best = best_index(&accuracies);
    let (roc_curve, roc_note) = match best {
        Some(b) => match roc(&runs[b].network, &dataset.test, spec.roc_thresholds) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };
    let test_counts = dataset.test_counts();
    Ok(ExperimentReport {
        basin: spec.basin,
        strategy: spec.strategy,
        train_counts: dataset.train_counts(),
        test_counts,
        train_cyclones: dataset.train_tracks.len(),
        test_cyclones: dataset.test_tracks.len(),
        bounds: dataset.bounds,
        runs,
        failures,
        summary,
        best,
        roc: roc_curve,
        roc_note,
        baseline_accuracy: all_negative_accuracy(test_counts.positive, test_counts.total())?,
    })
}

fn region_name(basin: Basin) -> &'static str {
    match basin {
        Basin::SouthPacific => "South Pacific",
        Basin::SouthIndian => "South Indian",
        Basin::Other => "Other",
    }
}

impl ExperimentReport {
    pub fn best_run(&self) -> Option<&RunOutcome> {
        self.best.map(|b| &self.runs[b])
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from("run,seed,epochs,train_accuracy,test_accuracy\n");
        for r in &self.runs {
            let train_acc = r.history.train_accuracy.last().copied().unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.run,
                r.seed,
                r.history.epochs(),
                100.0 * train_acc,
                r.test_accuracy
            );
        }
        out
    }

    /// Human-readable summary: class counts, mean ± std, baseline, best-run matrix and notes.
    pub fn summary_text(&self) -> String {
        let region = region_name(self.basin);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Detection of rapid intensification: {region}, Strategy {}",
            self.strategy
        );
        let _ = writeln!(
            s,
            "Cyclones: {} training, {} testing",
            self.train_cyclones, self.test_cyclones
        );
        let _ = writeln!(
            s,
            "Normalization bounds: [{}, {}] kt\n",
            self.bounds.min_kt, self.bounds.max_kt
        );
        s.push_str(&format_class_table(
            region,
            self.train_counts,
            self.test_counts,
        ));
        s.push('\n');

        let _ = writeln!(s, "{:<14} {:<9} Percentage (Test)", "Problem", "Strategy");
        let pct = match (&self.summary, self.runs.as_slice()) {
            (Some(sum), _) => sum.mean_std(),
            (None, [only]) => format!("{:.3}", only.test_accuracy),
            (None, _) => "n/a".into(),
        };
        let _ = writeln!(s, "{:<14} {:<9} {}", region, self.strategy, pct);
        let _ = writeln!(
            s,
            "Runs: {} succeeded, {} failed",
            self.runs.len(),
            self.failures.len()
        );
        let _ = writeln!(
            s,
            "All-negative baseline on the test set: {:.3}%",
            self.baseline_accuracy
        );

        if let Some(best) = self.best_run() {
            let _ = writeln!(
                s,
                "\nBest run: {} (seed {}), test accuracy {:.3}%",
                best.run, best.seed, best.test_accuracy
            );
            s.push_str(&best.test_confusion.render_table(&format!(
                "Strategy {} Confusion Matrix for {region}",
                self.strategy
            )));
        }
        match (&self.roc, &self.roc_note) {
            (Some(c), _) => {
                let _ = writeln!(s, "Best-run ROC AUC: {:.4}", auc(c));
            }
            (None, Some(note)) => {
                let _ = writeln!(s, "ROC not computed: {note}");
            }
            _ => {}
        }

        if let Some(r) = reference::result(self.basin, self.strategy) {
            let _ = writeln!(s, "\nReference results for this basin and strategy:");
            let _ = writeln!(s, "  percentage (test): {:.3} ± {:.3}", r.mean, r.std_dev);
            let ref_acc = accuracy(&r.best_run).unwrap_or(f64::NAN);
            let _ = writeln!(
                s,
                "  best-run matrix tp {} fn {} fp {} tn {} (accuracy {:.2}%)",
                r.best_run.tp, r.best_run.fn_, r.best_run.fp, r.best_run.tn, ref_acc
            );
            if ref_acc > r.mean + 3.0 * r.std_dev {
                let _ = writeln!(
                    s,
                    "  note: reference best-run accuracy lies {:.0} standard deviations above the \
                     reference mean, so the reference percentage may not be plain accuracy",
                    (ref_acc - r.mean) / r.std_dev
                );
            }
        }
        if let Some(r) = reference::counts(self.basin).filter(|_| self.strategy == Strategy::I) {
            let _ = writeln!(
                s,
                "  reference window counts: train {}/{}, test {}/{} (positive/negative)",
                r.train.positive, r.train.negative, r.test.positive, r.test.negative
            );
        }
        for (run, msg) in &self.failures {
            let _ = writeln!(s, "run {run} failed: {msg}");
        }
        s
    }

    /// Writes every artifact into `dir` (created if missing).
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("runs.csv"), self.runs_csv())?;
        fs::write(dir.join("summary.txt"), self.summary_text())?;
        fs::write(
            dir.join("bounds.json"),
            serde_json::to_string_pretty(&self.bounds)?,
        )?;
        if let Some(best) = self.best_run() {
            fs::write(dir.join("confusion.csv"), best.test_confusion.to_csv())?;
            fs::write(
                dir.join("confusion.txt"),
                best.test_confusion.render_table(&format!(
                    "Strategy {} Confusion Matrix for {}",
                    self.strategy,
                    region_name(self.basin)
                )),
            )?;
            fs::write(dir.join("best_network.json"), best.network.to_json()?)?;
            fs::write(dir.join("best_history.csv"), best.history.to_csv())?;
        }
        if let Some(curve) = &self.roc {
            fs::write(dir.join("roc.csv"), curve.to_csv())?;
        }
        Ok(())
    }

    /// Error describing failed runs, if any.
    pub fn failure_error(&self) -> Option<Error> {
        self.failures.first().map(|(_, msg)| Error::RunsFailed {
            failed: self.failures.len(),
            total: self.failures.len() + self.runs.len(),
            first: msg.clone(),
        })
    }
}

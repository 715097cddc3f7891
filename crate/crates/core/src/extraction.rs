//! Rapid-intensification labeling and fixed-length window extraction.
//!
//! A point `t` is positive when the intensity four steps (24 h) later has risen
//! by at least the strategy threshold. Windows end at the labeled point and
//! carry the five most recent intensities, oldest first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::besttrack::CycloneTrack;
use crate::error::{Error, Result};

/// Input points per window, equal to the network's unfolding depth.
pub const WINDOW_LEN: usize = 5;
/// 24 hours at 6-hour cadence.
pub const LOOKAHEAD_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// 30-kt rise in 24 h, 5 hidden units.
    I,
    /// 10-kt rise in 24 h, 10 hidden units.
    II,
}

impl Strategy {
    pub fn threshold_kt(self) -> u16 {
        match self {
            Strategy::I => 30,
            Strategy::II => 10,
        }
    }

    pub fn hidden_units(self) -> usize {
        match self {
            Strategy::I => 5,
            Strategy::II => 10,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Strategy::I => "I",
            Strategy::II => "II",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "1" | "I" => Ok(Strategy::I),
            "2" | "II" => Ok(Strategy::II),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub cyclone_id: String,
    /// Index of the last input point within its (segment) track.
    pub anchor_index: usize,
    /// Oldest first. Raw knots straight out of [`make_windows`], `[0, 1]` after [`normalize`].
    pub inputs: Vec<f64>,
    /// RI within the 24 h following the anchor point.
    pub label: bool,
}

/// Per-point RI labels. Entry `t` compares `vmax(t + 4)` against `vmax(t)`;
/// the last four points have no lookahead and get no entry, so the result has
/// `len - 4` entries (none for tracks shorter than five points).
///
/// The track must be contiguous; use [`CycloneTrack::segments`] first.
pub fn label_ri_points(track: &CycloneTrack, threshold_kt: u16) -> Vec<bool> {
    debug_assert!(threshold_kt > 0);
    let v = track.intensities();
    if v.len() <= LOOKAHEAD_STEPS {
        return Vec::new();
    }
    v.iter()
        .zip(&v[LOOKAHEAD_STEPS..])
        .map(|(&now, &later)| i32::from(later) - i32::from(now) >= i32::from(threshold_kt))
        .collect()
}

/// Emits one raw window per labeled point with enough history.
pub fn make_windows(
    track: &CycloneTrack,
    labels: &[bool],
    window_len: usize,
) -> Vec<LabeledWindow> {
    let v = track.intensities();
    let start = window_len.saturating_sub(1);
    (start..labels.len().min(v.len()))
        .map(|t| LabeledWindow {
            cyclone_id: track.cyclone_id.clone(),
            anchor_index: t,
            inputs: v[t + 1 - window_len..=t]
                .iter()
                .map(|&x| f64::from(x))
                .collect(),
            label: labels[t],
        })
        .collect()
}

/// Labels and windows every contiguous segment of a track.
pub fn extract_windows(track: &CycloneTrack, threshold_kt: u16) -> Vec<LabeledWindow> {
    track
        .segments()
        .iter()
        .flat_map(|seg| make_windows(seg, &label_ri_points(seg, threshold_kt), WINDOW_LEN))
        .collect()
}

pub fn extract_all(tracks: &[CycloneTrack], threshold_kt: u16) -> Vec<LabeledWindow> {
    tracks
        .iter()
        .flat_map(|t| extract_windows(t, threshold_kt))
        .collect()
}

/// Min–max scaling frozen on the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub min_kt: f64,
    pub max_kt: f64,
}

impl NormalizationBounds {
    pub fn new(min_kt: f64, max_kt: f64) -> Result<Self> {
        if !(min_kt.is_finite() && max_kt.is_finite()) || max_kt <= min_kt {
            return Err(Error::DegenerateBounds(format!(
                "need min < max, got [{min_kt}, {max_kt}]"
            )));
        }
        Ok(NormalizationBounds { min_kt, max_kt })
    }

    pub fn scale(&self, x: f64) -> f64 {
        ((x - self.min_kt) / (self.max_kt - self.min_kt)).clamp(0.0, 1.0)
    }
}

/// Fractional margin added on each side of the observed training range.
pub const BOUNDS_MARGIN: f64 = 0.05;

pub fn fit_bounds(windows: &[LabeledWindow]) -> Result<NormalizationBounds> {
    let mut values = windows.iter().flat_map(|w| w.inputs.iter().copied());
    let first = values
        .next()
        .ok_or_else(|| Error::DegenerateBounds("no training values".into()))?;
    let (lo, hi) = values.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi <= lo {
        return Err(Error::DegenerateBounds(format!(
            "all training intensities equal {lo} kt"
        )));
    }
    let margin = BOUNDS_MARGIN * (hi - lo);
    NormalizationBounds::new(lo - margin, hi + margin)
}

pub fn normalize(window: &LabeledWindow, bounds: &NormalizationBounds) -> LabeledWindow {
    LabeledWindow {
        inputs: window.inputs.iter().map(|&x| bounds.scale(x)).collect(),
        ..window.clone()
    }
}

pub fn normalize_all(
    windows: &[LabeledWindow],
    bounds: &NormalizationBounds,
) -> Vec<LabeledWindow> {
    windows.iter().map(|w| normalize(w, bounds)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn of(windows: &[LabeledWindow]) -> Self {
        let positive = windows.iter().filter(|w| w.label).count();
        ClassCounts {
            positive,
            negative: windows.len() - positive,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

/// Renders train/test class counts as a region block of the occurrence table.
pub fn format_class_table(region: &str, train: ClassCounts, test: ClassCounts) -> String {
    let mut out = format!(
        "{:<14} {:<13} {:>12} {:>12} {:>8}\n",
        "Region", "Dataset", "No. Positive", "No. Negative", "Total"
    );
    for (name, c) in [("Training Set", train), ("Testing Set", test)] {
        out.push_str(&format!(
            "{:<14} {:<13} {:>12} {:>12} {:>8}\n",
            region,
            name,
            c.positive,
            c.negative,
            c.total()
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycloneReport {
    pub cyclone_id: String,
    pub duration_steps: usize,
    pub ri_count: usize,
}

/// Duration and count of RI-positive points per cyclone (all segments pooled).
pub fn duration_ri_report(tracks: &[CycloneTrack], threshold_kt: u16) -> Vec<CycloneReport> {
    tracks
        .iter()
        .map(|track| CycloneReport {
            cyclone_id: track.cyclone_id.clone(),
            duration_steps: track.duration_steps(),
            ri_count: track
                .segments()
                .iter()
                .map(|s| {
                    label_ri_points(s, threshold_kt)
                        .into_iter()
                        .filter(|&l| l)
                        .count()
                })
                .sum(),
        })
        .collect()
}

/// Pearson correlation between duration and RI count; `None` when either is constant.
pub fn duration_ri_correlation(reports: &[CycloneReport]) -> Option<f64> {
    if reports.len() < 2 {
        return None;
    }
    let n = reports.len() as f64;
    let xs: Vec<f64> = reports.iter().map(|r| r.duration_steps as f64).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.ri_count as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn write_windows_csv(windows: &[LabeledWindow]) -> Result<String> {
    let width = windows.first().map_or(WINDOW_LEN, |w| w.inputs.len());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cyclone_id".to_string(), "anchor_index".to_string()];
    header.extend((1..=width).map(|i| format!("x{i}")));
    header.push("label".into());
    writer.write_record(&header)?;
    for w in windows {
        if w.inputs.len() != width {
            return Err(Error::WindowLength {
                expected: width,
                actual: w.inputs.len(),
            });
        }
        let mut row = vec![w.cyclone_id.clone(), w.anchor_index.to_string()];
        row.extend(w.inputs.iter().map(f64::to_string));
        row.push(u8::from(w.label).to_string());
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_windows_csv(text: &str) -> Result<Vec<LabeledWindow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    for required in ["cyclone_id", "anchor_index", "label"] {
        if !names.contains(&required) {
            return Err(Error::MissingColumn(required.into()));
        }
    }
    let width = names.iter().filter(|h| h.starts_with('x')).count();
    let expected: Vec<String> = ["cyclone_id", "anchor_index"]
        .into_iter()
        .map(String::from)
        .chain((1..=width).map(|i| format!("x{i}")))
        .chain(["label".to_string()])
        .collect();
    if names != expected {
        return Err(Error::Record {
            line: 1,
            message: format!("unexpected window header `{}`", names.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Record { line, message };
        let anchor_index = record[1]
            .parse()
            .map_err(|_| bad(format!("bad anchor_index `{}`", &record[1])))?;
        let inputs = (2..2 + width)
            .map(|i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("non-numeric input `{}`", &record[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = match &record[2 + width] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push(LabeledWindow {
            cyclone_id: record[0].to_string(),
            anchor_index,
            inputs,
            label,
        });
    }
    Ok(out)
}

pub fn write_report_csv(reports: &[CycloneReport]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in reports {
        writer.serialize(r)?;
    }
    if reports.is_empty() {
        writer.write_record(["cyclone_id", "duration_steps", "ri_count"])?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_report_csv(text: &str) -> Result<Vec<CycloneReport>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

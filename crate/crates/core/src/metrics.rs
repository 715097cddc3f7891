//! Binary classification metrics: confusion matrices, accuracy, ROC/AUC and
//! aggregation over repeated runs.

use serde::{Deserialize, Serialize};

use crate::elman::ElmanNetwork;
use crate::error::{Error, Result};
use crate::extraction::LabeledWindow;

/// Anything that maps a window to a score in `[0, 1]`.
pub trait Scorer {
    fn score(&self, inputs: &[f64]) -> Result<f64>;
}

impl Scorer for ElmanNetwork {
    fn score(&self, inputs: &[f64]) -> Result<f64> {
        self.forward(inputs)
    }
}

impl<F> Scorer for F
where
    F: Fn(&[f64]) -> f64,
{
    fn score(&self, inputs: &[f64]) -> Result<f64> {
        Ok(self(inputs))
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Positive iff the score reaches the threshold (ties are positive).
pub fn classify(model: &impl Scorer, window: &[f64], threshold: f64) -> Result<bool> {
    Ok(model.score(window)? >= threshold)
}

pub fn scores(model: &(impl Scorer + Sync), windows: &[LabeledWindow]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    windows.par_iter().map(|w| model.score(&w.inputs)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub const fn new(tp: usize, fn_: usize, fp: usize, tn: usize) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len());
        let mut cm = ConfusionMatrix::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (a, p) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fn_ += 1,
                (false, true) => cm.fp += 1,
                (false, false) => cm.tn += 1,
            }
        }
        cm
    }

    pub fn from_scores(scores: &[f64], actual: &[bool], threshold: f64) -> Self {
        let predicted: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
        Self::from_predictions(&predicted, actual)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn actual_positive(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn actual_negative(&self) -> usize {
        self.fp + self.tn
    }

    pub fn predicted_positive(&self) -> usize {
        self.tp + self.fp
    }

    pub fn predicted_negative(&self) -> usize {
        self.fn_ + self.tn
    }

    pub fn true_positive_rate(&self) -> Option<f64> {
        (self.actual_positive() > 0).then(|| self.tp as f64 / self.actual_positive() as f64)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        (self.actual_negative() > 0).then(|| self.fp as f64 / self.actual_negative() as f64)
    }

    /// Grid with row and column totals, actual classes as rows.
    pub fn render_table(&self, title: &str) -> String {
        let mut s = format!("{title}\n");
        s.push_str(&format!(
            "{:<18}{:>10}{:>10}{:>10}\n",
            "", "Predicted", "", ""
        ));
        s.push_str(&format!(
            "{:<18}{:>10}{:>10}{:>10}\n",
            "", "Positive", "Negative", "Total"
        ));
        s.push_str(&format!(
            "{:<18}{:>10}{:>10}{:>10}\n",
            "Actual  Positive",
            self.tp,
            self.fn_,
            self.actual_positive()
        ));
        s.push_str(&format!(
            "{:<18}{:>10}{:>10}{:>10}\n",
            "        Negative",
            self.fp,
            self.tn,
            self.actual_negative()
        ));
        s.push_str(&format!(
            "{:<18}{:>10}{:>10}{:>10}\n",
            "        Total",
            self.predicted_positive(),
            self.predicted_negative(),
            self.total()
        ));
        s
    }

    pub fn to_csv(&self) -> String {
        format!(
            "tp,fn,fp,tn\n{},{},{},{}\n",
            self.tp, self.fn_, self.fp, self.tn
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let row = reader.deserialize().next().ok_or(Error::Record {
            line: 2,
            message: "missing confusion-matrix row".into(),
        })??;
        Ok(row)
    }
}

pub fn confusion(
    model: &(impl Scorer + Sync),
    windows: &[LabeledWindow],
    threshold: f64,
) -> Result<ConfusionMatrix> {
    if windows.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let s = scores(model, windows)?;
    let actual: Vec<bool> = windows.iter().map(|w| w.label).collect();
    Ok(ConfusionMatrix::from_scores(&s, &actual, threshold))
}

/// Percentage of correct decisions.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(100.0 * (cm.tp + cm.tn) as f64 / cm.total() as f64)
}

/// Accuracy of always answering "no RI" on a set with `positives` of `total`.
pub fn all_negative_accuracy(positives: usize, total: usize) -> Result<f64> {
    accuracy(&ConfusionMatrix::new(
        0,
        positives,
        0,
        total.saturating_sub(positives),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Thresholds strictly decreasing, starting at +∞ and ending at −∞.
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let (Some(first), Some(last)) = (self.points.first(), self.points.last()) else {
            return Err("empty curve".into());
        };
        if (first.fpr, first.tpr) != (0.0, 0.0) || (last.fpr, last.tpr) != (1.0, 1.0) {
            return Err("curve must run from (0,0) to (1,1)".into());
        }
        for pair in self.points.windows(2) {
            if pair[1].threshold >= pair[0].threshold {
                return Err(format!(
                    "thresholds not strictly decreasing at {}",
                    pair[1].threshold
                ));
            }
            if pair[1].fpr < pair[0].fpr || pair[1].tpr < pair[0].tpr {
                return Err(format!("rates decrease at threshold {}", pair[1].threshold));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let points = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        Ok(RocCurve { points })
    }
}

/// ROC over the distinct scores, bracketed by ±∞ sentinels.
///
/// With `max_thresholds = Some(n)` and more than `n` distinct scores, `n`
/// evenly spaced distinct scores (always including the extremes) are used.
pub fn roc_from_scores(
    scores: &[f64],
    actual: &[bool],
    max_thresholds: Option<usize>,
) -> Result<RocCurve> {
    assert_eq!(scores.len(), actual.len());
    let pos = actual.iter().filter(|&&a| a).count();
    let neg = actual.len() - pos;
    if pos == 0 {
        return Err(Error::SingleClass("positive"));
    }
    if neg == 0 {
        return Err(Error::SingleClass("negative"));
    }

    let mut ranked: Vec<(f64, bool)> = scores.iter().copied().zip(actual.iter().copied()).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    // (threshold, tp, fp) for each distinct score, descending
    let mut cumulative: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (i, &(s, a)) in ranked.iter().enumerate() {
        if a {
            tp += 1;
        } else {
            fp += 1;
        }
        if ranked.get(i + 1).is_none_or(|next| next.0 != s) {
            cumulative.push((s, tp, fp));
        }
    }

    let chosen: Vec<(f64, usize, usize)> = match max_thresholds {
        Some(n) if n >= 2 && cumulative.len() > n => {
            let last = cumulative.len() - 1;
            let mut picks: Vec<usize> =
                (0..n).map(|i| (i * last + (n - 1) / 2) / (n - 1)).collect();
            picks.dedup();
            picks.into_iter().map(|i| cumulative[i]).collect()
        }
        Some(1) if cumulative.len() > 1 => vec![cumulative[cumulative.len() - 1]],
        _ => cumulative,
    };

    let mut points = Vec::with_capacity(chosen.len() + 2);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    points.extend(chosen.into_iter().map(|(threshold, tp, fp)| RocPoint {
        threshold,
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
    }));
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(RocCurve { points })
}

pub fn roc(
    model: &(impl Scorer + Sync),
    windows: &[LabeledWindow],
    max_thresholds: Option<usize>,
) -> Result<RocCurve> {
    let s = scores(model, windows)?;
    let actual: Vec<bool> = windows.iter().map(|w| w.label).collect();
    roc_from_scores(&s, &actual, max_thresholds)
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|p| (p[1].fpr - p[0].fpr) * (p[1].tpr + p[0].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_dev: f64,
    /// Highest accuracy; the lowest index wins ties.
    pub best_run: usize,
}

impl RunSummary {
    /// `mean ± std` with three decimals.
    pub fn mean_std(&self) -> String {
        format!("{:.3} ± {:.3}", self.mean, self.std_dev)
    }
}

/// Index of the highest value, lowest index on ties.
pub fn best_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn aggregate_runs(accuracies: &[f64]) -> Result<RunSummary> {
    if accuracies.len() < 2 {
        return Err(Error::TooFewRuns(accuracies.len()));
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(RunSummary {
        accuracies: accuracies.to_vec(),
        mean,
        std_dev: var.sqrt(),
        best_run: best_index(accuracies).expect("non-empty"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn windows(labels: &[bool], scores: &[f64]) -> Vec<LabeledWindow> {
        labels
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(i, (&label, &s))| LabeledWindow {
                cyclone_id: format!("w{i}"),
                anchor_index: i,
                inputs: vec![s],
                label,
            })
            .collect()
    }

    fn identity(x: &[f64]) -> f64 {
        x[0]
    }

    #[test]
    fn tie_is_positive() {
        assert!(classify(&identity, &[0.5], 0.5).unwrap());
        assert!(classify(&identity, &[0.0], 0.0).unwrap());
        assert!(!classify(&identity, &[1.0], 1.0 + 1e-9).unwrap());
    }

    #[test]
    fn confusion_counts() {
        let w = windows(
            &[true, true, false, false, false],
            &[0.9, 0.2, 0.6, 0.1, 0.5],
        );
        let cm = confusion(&identity, &w, 0.5).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 2, 1));
        assert_eq!(cm.total(), 5);
        let all_neg = confusion(&|_: &[f64]| 0.0, &w, 0.5).unwrap();
        assert_eq!((all_neg.tp, all_neg.fp), (0, 0));
        assert!(matches!(
            confusion(&identity, &[], 0.5),
            Err(Error::EmptyEvaluationSet)
        ));
    }

    #[test]
    fn accuracy_values() {
        assert_eq!(accuracy(&ConfusionMatrix::new(3, 0, 0, 7)).unwrap(), 100.0);
        assert!(accuracy(&ConfusionMatrix::default()).is_err());
        let cm = ConfusionMatrix::new(50, 308, 66, 1452);
        assert!((accuracy(&cm).unwrap() - 100.0 * 1502.0 / 1876.0).abs() < 1e-12);
    }

    #[test]
    fn roc_degenerate_cases() {
        let labels = [true, false, true, false];
        let perfect = roc_from_scores(&[0.9, 0.1, 0.8, 0.2], &labels, None).unwrap();
        assert!(perfect.validate().is_ok());
        assert!(perfect.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&perfect), 1.0);
        let constant = roc_from_scores(&[0.4; 4], &labels, None).unwrap();
        assert_eq!(constant.points.len(), 3);
        assert_eq!(auc(&constant), 0.5);
        assert!(matches!(
            roc_from_scores(&[0.1, 0.2], &[false, false], None),
            Err(Error::SingleClass("positive"))
        ));
        assert!(matches!(
            roc_from_scores(&[0.1, 0.2], &[true, true], None),
            Err(Error::SingleClass("negative"))
        ));
    }

    #[test]
    fn roc_subsampling_keeps_extremes() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let labels: Vec<bool> = (0..100).map(|i| i % 3 == 0).collect();
        let full = roc_from_scores(&scores, &labels, None).unwrap();
        let thin = roc_from_scores(&scores, &labels, Some(10)).unwrap();
        assert_eq!(full.points.len(), 102);
        assert_eq!(thin.points.len(), 12);
        assert!(thin.validate().is_ok());
        assert_eq!(thin.points[1].threshold, 0.99);
        assert_eq!(thin.points[10].threshold, 0.0);
    }

    #[test]
    fn aggregate_values() {
        let s = aggregate_runs(&[80.0, 80.0, 80.0]).unwrap();
        assert_eq!((s.mean, s.std_dev), (80.0, 0.0));
        assert_eq!(s.best_run, 0);
        let s = aggregate_runs(&[79.0, 81.0]).unwrap();
        assert_eq!(s.mean, 80.0);
        assert!((s.std_dev - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.best_run, 1);
        assert_eq!(s.mean_std(), "80.000 ± 1.414");
        assert!(matches!(aggregate_runs(&[90.0]), Err(Error::TooFewRuns(1))));
    }

    #[test]
    fn csv_round_trips() {
        let cm = ConfusionMatrix::new(381, 837, 316, 4835);
        assert_eq!(ConfusionMatrix::from_csv(&cm.to_csv()).unwrap(), cm);
        let curve = roc_from_scores(&[0.3, 0.7, 0.5], &[false, true, true], None).unwrap();
        assert_eq!(RocCurve::from_csv(&curve.to_csv()).unwrap(), curve);
    }

    #[test]
    fn table_layout() {
        let t = ConfusionMatrix::new(0, 7, 2, 1999).render_table("Strategy I");
        assert!(t.contains("2008"));
        assert!(t.lines().nth(3).unwrap().ends_with("7"));
    }
}

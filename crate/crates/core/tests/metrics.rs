mod common;

use proptest::prelude::*;
use rand::Rng;
use tcri::extraction::LabeledWindow;
use tcri::metrics::{
    accuracy, all_negative_accuracy, auc, classify, confusion, roc, roc_from_scores,
    ConfusionMatrix,
};

/// P(score(pos) > score(neg)) + ½·P(tie) over all pairs.
fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (sp, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, &l)| !l) {
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn windows_from_scores(scores: &[f64], labels: &[bool]) -> Vec<LabeledWindow> {
    scores
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&s, &label))| LabeledWindow {
            cyclone_id: format!("w{i}"),
            anchor_index: i,
            inputs: vec![s],
            label,
        })
        .collect()
}

fn first(x: &[f64]) -> f64 {
    x[0]
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    // coarse score grid so ties are common
    prop::collection::vec((0u8..12, any::<bool>()), 2..50)
        .prop_filter("both classes", |v| {
            v.iter().any(|x| x.1) && v.iter().any(|x| !x.1)
        })
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 11.0, l)).unzip())
}

proptest! {
    #[test]
    fn auc_equals_pairwise_ranking((scores, labels) in scored_labels()) {
        let curve = roc_from_scores(&scores, &labels, None).unwrap();
        prop_assert!(curve.validate().is_ok());
        let a = auc(&curve);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn confusion_monotone_in_threshold((scores, labels) in scored_labels(), t1 in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let w = windows_from_scores(&scores, &labels);
        let lo = confusion(&first, &w, t1).unwrap();
        let hi = confusion(&first, &w, t1 + dt).unwrap();
        prop_assert_eq!(lo.actual_positive(), hi.actual_positive());
        prop_assert_eq!(lo.actual_negative(), hi.actual_negative());
        prop_assert!(hi.predicted_positive() <= lo.predicted_positive());
        prop_assert!(hi.tp <= lo.tp && hi.fp <= lo.fp);
        prop_assert_eq!(lo.total(), w.len());
    }

    #[test]
    fn all_negative_accuracy_is_exact(p in 0usize..500, extra in 1usize..5000) {
        let n = p + extra;
        let acc = all_negative_accuracy(p, n).unwrap();
        prop_assert_eq!(acc, 100.0 * (n - p) as f64 / n as f64);
    }

    #[test]
    fn classify_agrees_with_manual_comparison(s in 0.0f64..1.0, t in -0.5f64..1.5) {
        prop_assert_eq!(classify(&first, &[s], t).unwrap(), s >= t);
    }
}

#[test]
fn threshold_extremes() {
    let w = windows_from_scores(&[0.0, 0.3, 1.0], &[true, false, false]);
    let always = confusion(&first, &w, 0.0).unwrap();
    assert_eq!(always.predicted_negative(), 0);
    let never = confusion(&first, &w, 1.0 + 1e-9).unwrap();
    assert_eq!(never.predicted_positive(), 0);
    assert_eq!(accuracy(&never).unwrap(), 100.0 * 2.0 / 3.0);
}

#[test]
fn random_scores_give_chance_auc() {
    let mut r = common::rng(99);
    let labels: Vec<bool> = (0..10_000).map(|i| i % 2 == 0).collect();
    let scores: Vec<f64> = labels.iter().map(|_| r.random_range(0.0..1.0)).collect();
    let a = auc(&roc_from_scores(&scores, &labels, None).unwrap());
    assert!((a - 0.5).abs() <= 0.05, "auc {a}");
}

#[test]
fn roc_from_model_matches_from_scores() {
    let scores = [0.1, 0.4, 0.35, 0.8, 0.65, 0.2];
    let labels = [false, true, false, true, true, false];
    let w = windows_from_scores(&scores, &labels);
    assert_eq!(
        roc(&first, &w, None).unwrap(),
        roc_from_scores(&scores, &labels, None).unwrap()
    );
    let cm = ConfusionMatrix::from_scores(&scores, &labels, 0.4);
    assert_eq!(cm, ConfusionMatrix::new(3, 0, 0, 3));
}

//! Sigmoid/threshold classification head, confusion counts, metrics and the
//! two training rewards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LabeledData;
use crate::expr::{ExprError, ExprTree, FeatureMatrix};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// cross-entropy.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("metrics of an empty dataset")]
    EmptyDataset,
    #[error("threshold {0} is outside (0, 1)")]
    BadThreshold(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RewardKind {
    /// Normalised inverse cross-entropy, `1 / (1 + CE)`.
    #[serde(rename = "ce")]
    CrossEntropy,
    #[default]
    #[serde(rename = "f1")]
    F1,
}

impl std::str::FromStr for RewardKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ce" | "cross-entropy" => Ok(RewardKind::CrossEntropy),
            "f1" => Ok(RewardKind::F1),
            other => Err(format!("unknown reward kind {other:?} (expected ce or f1)")),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn check_threshold(t: f64) -> Result<f64, ClassifyError> {
    if t > 0.0 && t < 1.0 {
        Ok(t)
    } else {
        Err(ClassifyError::BadThreshold(t))
    }
}

/// Labels and validity of one expression over a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<bool>,
    pub probs: Vec<f64>,
    /// False if any row evaluated to a non-finite value.
    pub valid: bool,
}

/// Fraud (`true`) iff `σ(f(x)) ≥ t`. Rows with a non-finite `f(x)` are
/// labelled legitimate and mark the prediction invalid.
pub fn predict(tree: &ExprTree, x: &FeatureMatrix, t: f64) -> Result<Prediction, ClassifyError> {
    check_threshold(t)?;
    let eval = tree.evaluate_batch(x)?;
    let mut labels = Vec::with_capacity(eval.values.len());
    let mut probs = Vec::with_capacity(eval.values.len());
    for &v in &eval.values {
        if v.is_finite() {
            let p = sigmoid(v);
            labels.push(p >= t);
            probs.push(p);
        } else {
            labels.push(false);
            probs.push(f64::NAN);
        }
    }
    Ok(Prediction {
        labels,
        probs,
        valid: eval.is_valid(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn predicted_positive(&self) -> usize {
        self.tp + self.fp
    }
}

pub fn confusion(pred: &[bool], truth: &[bool]) -> Result<Confusion, ClassifyError> {
    if pred.len() != truth.len() {
        return Err(ClassifyError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut c = Confusion::default();
    for (&p, &y) in pred.iter().zip(truth) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(c: &Confusion) -> Result<Metrics, ClassifyError> {
    let total = c.total();
    if total == 0 {
        return Err(ClassifyError::EmptyDataset);
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, total),
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

/// `1 / (1 + CE)` with CE the mean binary cross-entropy of the clamped
/// probabilities against the labels.
pub fn reward_ce(probs: &[f64], truth: &[bool]) -> Result<f64, ClassifyError> {
    if probs.len() != truth.len() {
        return Err(ClassifyError::LengthMismatch {
            left: probs.len(),
            right: truth.len(),
        });
    }
    if probs.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    let sum: f64 = probs
        .iter()
        .zip(truth)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    let ce = sum / probs.len() as f64;
    Ok(1.0 / (1.0 + ce))
}

/// F1 of the thresholded predictions; 0 for invalid expressions.
pub fn reward_f1(tree: &ExprTree, data: &LabeledData, t: f64) -> Result<f64, ClassifyError> {
    reward(tree, data, RewardKind::F1, t)
}

/// Reward of `tree` on `data`; invalid (non-finite) expressions score 0.
pub fn reward(tree: &ExprTree, data: &LabeledData, kind: RewardKind, t: f64) -> Result<f64, ClassifyError> {
    let pred = predict(tree, &data.x, t)?;
    if !pred.valid {
        return Ok(0.0);
    }
    Ok(match kind {
        RewardKind::F1 => metrics(&confusion(&pred.labels, &data.y)?)?.f1,
        RewardKind::CrossEntropy => reward_ce(&pred.probs, &data.y)?,
    })
}

/// Metrics of `tree` at threshold `t`, together with the confusion counts.
pub fn evaluate(tree: &ExprTree, data: &LabeledData, t: f64) -> Result<(Confusion, Metrics), ClassifyError> {
    let pred = predict(tree, &data.x, t)?;
    let c = confusion(&pred.labels, &data.y)?;
    Ok((c, metrics(&c)?))
}

/// Thresholds of the standard sweep.
pub const SWEEP_THRESHOLDS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

/// Scores of one expression at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub threshold: f64,
    pub predicted_fraud: usize,
    /// Rows where the expression is not finite.
    pub invalid_rows: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

/// Evaluates `tree` once and scores it at every threshold.
pub fn threshold_sweep(
    tree: &ExprTree,
    data: &LabeledData,
    thresholds: &[f64],
) -> Result<Vec<SweepRecord>, ClassifyError> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    let values = tree.evaluate_batch(&data.x)?.values;
    let invalid_rows = values.iter().filter(|v| !v.is_finite()).count();
    thresholds
        .iter()
        .map(|&t| {
            let labels: Vec<bool> = values.iter().map(|&v| v.is_finite() && sigmoid(v) >= t).collect();
            let c = confusion(&labels, &data.y)?;
            Ok(SweepRecord {
                threshold: t,
                predicted_fraud: c.predicted_positive(),
                invalid_rows,
                confusion: c,
                metrics: metrics(&c)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Library;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(rows: Vec<Vec<f64>>, y: Vec<bool>) -> LabeledData {
        LabeledData {
            x: FeatureMatrix::from_rows(&rows).unwrap(),
            y,
        }
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(0.8473) - 0.70).abs() < 1e-3);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        for v in [-30.0, -2.5, -0.1, 0.3, 4.0, 17.0] {
            assert!((sigmoid(-v) - (1.0 - sigmoid(v))).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_counts_as_fraud() {
        let lib = Library::standard(&["x".to_string()]).unwrap();
        let zero = ExprTree::parse_line(&lib, "- x x").unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![-4.0], vec![9.0]]).unwrap();
        let p = predict(&zero, &x, 0.5).unwrap();
        assert_eq!(p.labels, vec![true; 3]);
        assert!(matches!(predict(&zero, &x, 1.0), Err(ClassifyError::BadThreshold(_))));
    }

    #[test]
    fn non_finite_rows_invalidate() {
        let lib = Library::standard(&["x".to_string()]).unwrap();
        let log = ExprTree::parse_line(&lib, "log x").unwrap();
        let d = data(vec![vec![0.0], vec![5.0]], vec![false, true]);
        let p = predict(&log, &d.x, 0.5).unwrap();
        assert!(!p.valid);
        assert_eq!(p.labels, vec![false, true]);
        assert_eq!(reward_f1(&log, &d, 0.5).unwrap(), 0.0);
        assert_eq!(reward(&log, &d, RewardKind::CrossEntropy, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn confusion_examples() {
        let z = [false; 4];
        assert_eq!(
            confusion(&z, &z).unwrap(),
            Confusion {
                tp: 0,
                fp: 0,
                tn: 4,
                fn_: 0
            }
        );
        let truth = [true, false, true, false];
        let neg: Vec<bool> = truth.iter().map(|b| !b).collect();
        let c = confusion(&neg, &truth).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        let c = confusion(&[true, true, false, false], &truth).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        assert!(matches!(
            confusion(&[true], &truth),
            Err(ClassifyError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn metric_examples() {
        assert!((f1_score(0.95, 0.67) - 0.78).abs() < 0.01);
        assert!((f1_score(0.95, 0.67) - 0.785802).abs() < 1e-6);
        let m = metrics(&Confusion {
            tp: 1,
            fp: 1,
            tn: 1,
            fn_: 1,
        })
        .unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (0.5, 0.5, 0.5, 0.5));
        let m = metrics(&Confusion {
            tp: 0,
            fp: 0,
            tn: 7,
            fn_: 0,
        })
        .unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(metrics(&Confusion::default()), Err(ClassifyError::EmptyDataset));
    }

    #[test]
    fn ce_reward_examples() {
        let truth = [true, false, false, true, false];
        let half = [0.5; 5];
        let r = reward_ce(&half, &truth).unwrap();
        assert!((r - 1.0 / (1.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        let perfect: Vec<f64> = truth.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        let r = reward_ce(&perfect, &truth).unwrap();
        assert!(r > 1.0 - 1e-10 && r <= 1.0);
        let worse: Vec<f64> = truth.iter().map(|&y| if y { 0.3 } else { 0.7 }).collect();
        assert!(reward_ce(&worse, &truth).unwrap() < r);
        assert!(reward_ce(&worse, &truth).unwrap() < reward_ce(&half, &truth).unwrap());
    }

    #[test]
    fn f1_reward_examples() {
        let lib = Library::standard(&["x".to_string()]).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            rows.push(vec![i as f64]);
            y.push(i >= 95);
        }
        let d = data(rows, y);
        // -x never reaches σ ≥ 0.5 for x ≥ 1; x=0 gives f=0 (fraud) but is legitimate
        let never = ExprTree::parse_line(&lib, "- C=-1000 x").unwrap();
        assert_eq!(reward_f1(&never, &d, 0.5).unwrap(), 0.0);
        let oracle = ExprTree::parse_line(&lib, "- x C=94.5").unwrap();
        assert_eq!(reward_f1(&oracle, &d, 0.5).unwrap(), 1.0);
        let (_, m) = evaluate(&oracle, &d, 0.5).unwrap();
        assert!((m.f1 - reward_f1(&oracle, &d, 0.5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_match_brute_force_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1_000 {
            let n = rng.gen_range(1..60);
            let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
            let c = confusion(&pred, &truth).unwrap();
            let tp = (0..n).filter(|&i| pred[i] && truth[i]).count();
            let fp = (0..n).filter(|&i| pred[i] && !truth[i]).count();
            let fn_ = (0..n).filter(|&i| !pred[i] && truth[i]).count();
            assert_eq!((c.tp, c.fp, c.fn_, c.total()), (tp, fp, fn_, n));
            let m = metrics(&c).unwrap();
            let p = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let r = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            assert_eq!(m.f1, f1);
        }
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_fraud(vals in proptest::collection::vec(-8.0f64..8.0, 1..50), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
            let lib = Library::standard(&["x".to_string()]).unwrap();
            let tree = ExprTree::parse_line(&lib, "x").unwrap();
            let x = FeatureMatrix::from_columns(vec![vals]).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = predict(&tree, &x, lo).unwrap().labels.iter().filter(|&&b| b).count();
            let b = predict(&tree, &x, hi).unwrap().labels.iter().filter(|&&b| b).count();
            prop_assert!(b <= a);
        }

        #[test]
        fn f1_is_permutation_invariant(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..80), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let f = |v: &[(bool, bool)]| {
                let (p, t): (Vec<bool>, Vec<bool>) = v.iter().copied().unzip();
                metrics(&confusion(&p, &t).unwrap()).unwrap().f1
            };
            prop_assert_eq!(f(&pairs), f(&shuffled));
            prop_assert!((0.0..=1.0).contains(&f(&pairs)));
        }
    }

    #[test]
    fn sweep_matches_single_evaluations() {
        let lib = Library::standard(&["x".to_string()]).unwrap();
        let tree = ExprTree::parse_line(&lib, "log x").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen_range(-1.0..20.0)]).collect();
        let y = (0..300).map(|_| rng.gen_bool(0.3)).collect();
        let d = data(rows, y);
        let recs = threshold_sweep(&tree, &d, &SWEEP_THRESHOLDS).unwrap();
        assert_eq!(recs.len(), 5);
        for r in &recs {
            let (c, m) = evaluate(&tree, &d, r.threshold).unwrap();
            assert_eq!((r.confusion, r.metrics), (c, m));
            assert!(r.invalid_rows > 0);
        }
        assert!(recs.windows(2).all(|w| w[0].predicted_fraud >= w[1].predicted_fraud));
        assert!(threshold_sweep(&tree, &d, &[0.5, 1.0]).is_err());
    }
}

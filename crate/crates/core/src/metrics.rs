//! Classification and regression metrics plus the persistence baseline.

use crate::error::{LqeError, Result};
use crate::grade::{grade_of, QualityGrade, GRADE_COUNT};
use crate::preprocess::WindowSample;

/// 5x5 grade confusion counts; rows are true grades, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; GRADE_COUNT]; GRADE_COUNT],
}

impl ConfusionMatrix {
    /// Tally (truth, prediction) pairs.
    pub fn from_pairs(truths: &[QualityGrade], preds: &[QualityGrade]) -> Result<ConfusionMatrix> {
        if truths.is_empty() || truths.len() != preds.len() {
            return Err(LqeError::Validation(format!(
                "confusion matrix needs equal non-zero lengths, got {} truths and {} predictions",
                truths.len(),
                preds.len()
            )));
        }
        let mut counts = [[0u64; GRADE_COUNT]; GRADE_COUNT];
        for (&t, &p) in truths.iter().zip(preds) {
            counts[t.index()][p.index()] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn count(&self, truth: QualityGrade, pred: QualityGrade) -> u64 {
        self.counts[truth.index()][pred.index()]
    }

    pub fn row(&self, truth: QualityGrade) -> &[u64; GRADE_COUNT] {
        &self.counts[truth.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn diagonal(&self) -> u64 {
        (0..GRADE_COUNT).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        (0..GRADE_COUNT).map(|i| self.counts[i][j]).sum()
    }
}

/// Fraction of correctly classified samples.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(LqeError::Validation("accuracy of an empty matrix".into()));
    }
    Ok(cm.diagonal() as f64 / total as f64)
}

/// Per-class F1 scores in grade order.
///
/// `F1_i = 2 * P_i * R_i / (P_i + R_i)`, defined as 0 when both precision
/// and recall are 0. Classes without ground-truth support report `None`.
pub fn per_class_f1(cm: &ConfusionMatrix) -> [Option<f64>; GRADE_COUNT] {
    let mut scores = [None; GRADE_COUNT];
    for (i, slot) in scores.iter_mut().enumerate() {
        let support = cm.row_sum(i);
        if support == 0 {
            continue;
        }
        let tp = cm.counts[i][i] as f64;
        let predicted = cm.col_sum(i);
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = tp / support as f64;
        *slot = Some(if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    scores
}

/// Unweighted mean of per-class F1 over classes with ground-truth support.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    let scores = per_class_f1(cm);
    let supported: Vec<f64> = scores.iter().flatten().copied().collect();
    if supported.is_empty() {
        return Err(LqeError::Validation("macro-F1 with no supported class".into()));
    }
    Ok(supported.iter().sum::<f64>() / supported.len() as f64)
}

/// Persistence baseline: predict each window's label grade as the grade of
/// the raw RSRP at the window's final input step.
///
/// Expects unstandardized windows.
pub fn persistence_baseline(windows: &[WindowSample]) -> Result<Vec<QualityGrade>> {
    if windows.is_empty() {
        return Err(LqeError::Validation("persistence baseline on empty set".into()));
    }
    windows.iter().map(|w| grade_of(w.last_step_rsrp())).collect()
}

/// Evaluation summary for one model on one window set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub samples: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: [Option<f64>; GRADE_COUNT],
    /// MSE of the (trend, noise) pair on the standardized training scale.
    pub mse_standardized: f64,
    /// MSE of the recombined RSRP forecast in dBm.
    pub mse_dbm: f64,
    /// Accuracy of the persistence baseline on the same windows.
    pub baseline_accuracy: f64,
    /// dBm MSE of the persistence baseline on the same windows.
    pub baseline_mse_dbm: f64,
}

//! Structured text reports: stable `[section]` + `key = value` layout with
//! tab-separated tables, so scripts and tests can parse them back.

use std::fmt::Write as _;

use lqe_core::grade::QualityGrade;
use lqe_core::metrics::EvalReport;
use lqe_core::training::TrainHistory;

use crate::config::RunConfig;

/// Render the training report: resolved config, dataset shape, per-epoch
/// losses, and the checkpoint outcome.
pub fn train_report(
    config: &RunConfig,
    sessions: usize,
    train_windows: usize,
    val_windows: usize,
    test_windows: usize,
    history: &TrainHistory,
    model_file: &str,
) -> String {
    let mut out = String::new();
    out.push_str("[config]\ncommand = train\n");
    out.push_str(&config.record_body());

    out.push_str("\n[data]\n");
    let _ = writeln!(out, "sessions = {sessions}");
    let _ = writeln!(out, "windows_train = {train_windows}");
    let _ = writeln!(out, "windows_validation = {val_windows}");
    let _ = writeln!(out, "windows_test = {test_windows}");

    out.push_str("\n[history]\nepoch\ttrain_loss\tval_loss\n");
    for (i, (t, v)) in history.train_loss.iter().zip(&history.val_loss).enumerate() {
        let _ = writeln!(out, "{}\t{t}\t{v}", i + 1);
    }

    out.push_str("\n[result]\n");
    let _ = writeln!(out, "stopped_epoch = {}", history.stopped_epoch);
    let _ = writeln!(out, "best_epoch = {}", history.best_epoch);
    let best = history
        .val_loss
        .get(history.best_epoch.wrapping_sub(1))
        .copied()
        .unwrap_or(f64::NAN);
    let _ = writeln!(out, "best_val_loss = {best}");
    let _ = writeln!(out, "model_file = {model_file}");
    out
}

/// Render an evaluation report; every aggregate in it can be recomputed
/// from the confusion counts it carries.
pub fn eval_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("[evaluation]\n");
    let _ = writeln!(out, "samples = {}", report.samples);
    let _ = writeln!(out, "accuracy = {}", report.accuracy);
    let _ = writeln!(out, "macro_f1 = {}", report.macro_f1);
    let _ = writeln!(out, "mse_standardized = {}", report.mse_standardized);
    let _ = writeln!(out, "mse_dbm = {}", report.mse_dbm);
    let _ = writeln!(out, "baseline_accuracy = {}", report.baseline_accuracy);
    let _ = writeln!(out, "baseline_mse_dbm = {}", report.baseline_mse_dbm);

    out.push_str("\n[confusion_matrix]\n");
    out.push_str("# rows = true grade, columns = predicted grade\n");
    let names: Vec<&str> = QualityGrade::ALL.iter().map(|g| g.name()).collect();
    let _ = writeln!(out, "# order: {}", names.join(" "));
    for &truth in &QualityGrade::ALL {
        let row: Vec<String> = report
            .confusion
            .row(truth)
            .iter()
            .map(|c| c.to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join("\t"));
    }

    out.push_str("\n[per_class_f1]\n");
    for (grade, f1) in QualityGrade::ALL.iter().zip(&report.per_class_f1) {
        match f1 {
            Some(v) => {
                let _ = writeln!(out, "{} = {v}", grade.name());
            }
            None => {
                let _ = writeln!(out, "{} = n/a", grade.name());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use lqe_core::metrics::{accuracy, macro_f1, per_class_f1, ConfusionMatrix};

    #[test]
    fn eval_report_sections_are_parseable() {
        use QualityGrade::*;
        let cm = ConfusionMatrix::from_pairs(&[Good, Good, Bad], &[Good, Bad, Bad]).unwrap();
        let report = EvalReport {
            samples: 3,
            accuracy: accuracy(&cm).unwrap(),
            macro_f1: macro_f1(&cm).unwrap(),
            per_class_f1: per_class_f1(&cm),
            confusion: cm,
            mse_standardized: 0.25,
            mse_dbm: 3.5,
            baseline_accuracy: 0.5,
            baseline_mse_dbm: 7.0,
        };
        let text = eval_report(&report);
        assert!(text.contains("[evaluation]"));
        assert!(text.contains("samples = 3"));
        assert!(text.contains("[confusion_matrix]"));
        assert!(text.contains("good = 0.666666"));
        assert!(text.contains("very_good = n/a"));
    }
}

//! End-to-end glue: traces to windows, prepared splits, evaluation, and
//! per-window forecasting.

use crate::error::{LqeError, Result};
use crate::grade::{grade_of, recombine, QualityGrade};
use crate::lstm::{forward, pair_loss, DropoutMode, LstmModel};
use crate::metrics::{accuracy, macro_f1, per_class_f1, persistence_baseline, ConfusionMatrix, EvalReport};
use crate::preprocess::{
    build_windows, ema_decompose, oversample, split_dataset, DatasetSplit, SplitRatio,
    Standardizer, WindowSample,
};
use crate::trace::{impute_missing, SessionTrace};

/// Preprocessing settings for dataset preparation.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub tau: f64,
    pub window: usize,
    pub split: SplitRatio,
    /// Seed for the oversampling draws.
    pub seed: u64,
}

/// A ready-to-train dataset: standardized splits (train oversampled) plus
/// the fitted standardizer and the raw test windows for baseline metrics.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub split: DatasetSplit,
    pub standardizer: Standardizer,
    /// Unstandardized test windows, aligned one-to-one with `split.test`.
    pub raw_test: Vec<WindowSample>,
}

/// Impute, decompose, and window every session, concatenating the windows
/// in session order. The EMA restarts at each session boundary.
pub fn window_traces(
    traces: &[SessionTrace],
    tau: f64,
    window: usize,
) -> Result<Vec<WindowSample>> {
    if traces.is_empty() {
        return Err(LqeError::Validation("no traces to process".into()));
    }
    let names = &traces[0].feature_names;
    let mut windows = Vec::new();
    for (session_index, trace) in traces.iter().enumerate() {
        if &trace.feature_names != names {
            return Err(LqeError::Validation(format!(
                "session `{}` has a different feature set",
                trace.session_id
            )));
        }
        let series = impute_missing(trace).feature_series()?;
        let dec = ema_decompose(&series, tau)?;
        windows.extend(build_windows(&dec, window, session_index)?);
    }
    if windows.is_empty() {
        return Err(LqeError::Validation(format!(
            "traces are too short for window size {window}: need at least {} records in some session",
            window + 1
        )));
    }
    Ok(windows)
}

/// Full preparation: window, split chronologically, fit the standardizer on
/// the (pre-oversampling) training windows, standardize everything, then
/// oversample the training split only.
pub fn prepare(traces: &[SessionTrace], config: &PipelineConfig) -> Result<PreparedDataset> {
    let windows = window_traces(traces, config.tau, config.window)?;
    let split = split_dataset(windows, &config.split)?;

    let standardizer = Standardizer::fit(&split.train)?;
    let raw_test = split.test.clone();
    let train = oversample(&standardizer.apply(&split.train)?, config.seed)?;
    let validation = standardizer.apply(&split.validation)?;
    let test = standardizer.apply(&split.test)?;

    Ok(PreparedDataset {
        split: DatasetSplit {
            train,
            validation,
            test,
        },
        standardizer,
        raw_test,
    })
}

fn check_model_windows(model: &LstmModel, raw_windows: &[WindowSample]) -> Result<()> {
    if raw_windows.is_empty() {
        return Err(LqeError::Validation("no windows to evaluate".into()));
    }
    let channels = model.params.dims.input_channels();
    for w in raw_windows {
        if w.channels != channels {
            return Err(LqeError::Validation(format!(
                "window has {} channels but the model was trained on {channels}",
                w.channels
            )));
        }
        if w.steps != model.window {
            return Err(LqeError::Validation(format!(
                "window length {} does not match the model's window size {}",
                w.steps, model.window
            )));
        }
    }
    Ok(())
}

/// One next-step forecast alongside the realized value.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub window_index: usize,
    pub rsrp_dbm: f64,
    pub grade: QualityGrade,
    pub actual_rsrp_dbm: f64,
    pub actual_grade: QualityGrade,
}

/// Forecast each raw window with the model's stored standardizer and return
/// de-standardized, recombined RSRP predictions.
pub fn predict_windows(model: &LstmModel, raw_windows: &[WindowSample]) -> Result<Vec<Prediction>> {
    check_model_windows(model, raw_windows)?;
    let standardized = model.standardizer.apply(raw_windows)?;
    let mut out = Vec::with_capacity(raw_windows.len());
    for (i, (raw, std_w)) in raw_windows.iter().zip(&standardized).enumerate() {
        let (pred, _) = forward(&model.params, &std_w.inputs, std_w.steps, DropoutMode::Disabled)?;
        let pair = model.standardizer.invert_label(pred);
        let rsrp = recombine(pair[0], pair[1])?;
        out.push(Prediction {
            window_index: i,
            rsrp_dbm: rsrp,
            grade: grade_of(rsrp)?,
            actual_rsrp_dbm: raw.label_rsrp(),
            actual_grade: raw.label_grade,
        });
    }
    Ok(out)
}

/// Evaluate a model on raw (unstandardized) windows: grade metrics,
/// regression MSE on both scales, and the persistence baseline.
pub fn evaluate_model(model: &LstmModel, raw_windows: &[WindowSample]) -> Result<EvalReport> {
    check_model_windows(model, raw_windows)?;
    let standardized = model.standardizer.apply(raw_windows)?;

    let mut truths = Vec::with_capacity(raw_windows.len());
    let mut preds = Vec::with_capacity(raw_windows.len());
    let mut mse_std_sum = 0.0;
    let mut mse_dbm_sum = 0.0;
    for (raw, std_w) in raw_windows.iter().zip(&standardized) {
        let (pred, _) = forward(&model.params, &std_w.inputs, std_w.steps, DropoutMode::Disabled)?;
        mse_std_sum += pair_loss(pred, std_w.label);

        let pair = model.standardizer.invert_label(pred);
        let rsrp = recombine(pair[0], pair[1])?;
        let actual = raw.label_rsrp();
        mse_dbm_sum += (rsrp - actual) * (rsrp - actual);

        truths.push(raw.label_grade);
        preds.push(grade_of(rsrp)?);
    }
    let n = raw_windows.len() as f64;

    let baseline = persistence_baseline(raw_windows)?;
    let baseline_cm = ConfusionMatrix::from_pairs(&truths, &baseline)?;
    let baseline_mse_dbm = raw_windows
        .iter()
        .map(|w| {
            let d = w.last_step_rsrp() - w.label_rsrp();
            d * d
        })
        .sum::<f64>()
        / n;

    let confusion = ConfusionMatrix::from_pairs(&truths, &preds)?;
    Ok(EvalReport {
        samples: raw_windows.len(),
        accuracy: accuracy(&confusion)?,
        macro_f1: macro_f1(&confusion)?,
        per_class_f1: per_class_f1(&confusion),
        confusion,
        mse_standardized: mse_std_sum / n,
        mse_dbm: mse_dbm_sum / n,
        baseline_accuracy: accuracy(&baseline_cm)?,
        baseline_mse_dbm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{LstmParams, ModelDims};
    use crate::trace::{generate_synthetic_trace, FeatureSynthSpec, SyntheticSpec};

    fn small_trace(seed: u64, length: usize) -> SessionTrace {
        generate_synthetic_trace(&SyntheticSpec {
            session_id: format!("s{seed}"),
            length,
            features: vec![
                FeatureSynthSpec::new("rsrp_dbm", -95.0, 5.0, 0.9),
                FeatureSynthSpec::new("sinr_db", 8.0, 3.0, 0.8),
            ],
            seed,
        })
        .unwrap()
    }

    #[test]
    fn windows_concatenate_across_sessions_in_order() {
        let traces = [small_trace(1, 40), small_trace(2, 50)];
        let windows = window_traces(&traces, 10.0, 8).unwrap();
        assert_eq!(windows.len(), (40 - 8) + (50 - 8));
        assert!(windows[..32].iter().all(|w| w.session_index == 0));
        assert!(windows[32..].iter().all(|w| w.session_index == 1));
    }

    #[test]
    fn too_short_traces_name_the_window_size() {
        let traces = [small_trace(1, 8)];
        let err = window_traces(&traces, 10.0, 8).unwrap_err();
        assert!(err.to_string().contains('8'), "{err}");
    }

    #[test]
    fn prepare_standardizes_and_oversamples_train_only() {
        let traces = [small_trace(3, 300)];
        let config = PipelineConfig {
            tau: 10.0,
            window: 8,
            split: SplitRatio::default(),
            seed: 5,
        };
        let prepared = prepare(&traces, &config).unwrap();
        let total_raw = 300 - 8;
        let n_train_raw = (total_raw as f64 * 0.7).floor() as usize;
        let n_val = (total_raw as f64 * 0.2).floor() as usize;
        assert!(prepared.split.train.len() >= n_train_raw);
        assert_eq!(prepared.split.validation.len(), n_val);
        assert_eq!(prepared.split.test.len(), total_raw - n_train_raw - n_val);
        assert_eq!(prepared.raw_test.len(), prepared.split.test.len());
        // Raw test windows stay in dBm scale, standardized ones do not.
        assert!(prepared.raw_test[0].inputs[0] < -50.0);
        assert!(prepared.split.test[0].inputs[0].abs() < 50.0);
    }

    #[test]
    fn evaluate_rejects_mismatched_window_size() {
        let traces = [small_trace(4, 100)];
        let windows = window_traces(&traces, 10.0, 8).unwrap();
        let dims = ModelDims::new(2, 4, 1).unwrap();
        let model = LstmModel {
            params: LstmParams::init(dims, 0),
            standardizer: Standardizer::fit(&windows).unwrap(),
            window: 12,
            tau: 10.0,
        };
        assert!(evaluate_model(&model, &windows).is_err());
    }

    #[test]
    fn evaluation_is_internally_consistent() {
        let traces = [small_trace(5, 200)];
        let windows = window_traces(&traces, 10.0, 8).unwrap();
        let dims = ModelDims::new(2, 4, 1).unwrap();
        let model = LstmModel {
            params: LstmParams::init(dims, 1),
            standardizer: Standardizer::fit(&windows).unwrap(),
            window: 8,
            tau: 10.0,
        };
        let report = evaluate_model(&model, &windows).unwrap();
        assert_eq!(report.samples, windows.len());
        assert_eq!(report.confusion.total() as usize, windows.len());
        // Accuracy is recomputable from the matrix it ships with.
        let diag: u64 = QualityGrade::ALL
            .iter()
            .map(|&g| report.confusion.count(g, g))
            .sum();
        assert_eq!(report.accuracy, diag as f64 / report.samples as f64);
        assert!(report.mse_dbm > 0.0);
    }

    #[test]
    fn predictions_cover_every_window_and_grade_vocabulary() {
        let traces = [small_trace(6, 120)];
        let windows = window_traces(&traces, 10.0, 8).unwrap();
        let dims = ModelDims::new(2, 4, 1).unwrap();
        let model = LstmModel {
            params: LstmParams::init(dims, 2),
            standardizer: Standardizer::fit(&windows).unwrap(),
            window: 8,
            tau: 10.0,
        };
        let predictions = predict_windows(&model, &windows).unwrap();
        assert_eq!(predictions.len(), 120 - 8);
        for (i, p) in predictions.iter().enumerate() {
            assert_eq!(p.window_index, i);
            assert!(p.rsrp_dbm.is_finite());
            assert!(QualityGrade::ALL.contains(&p.grade));
        }
    }
}

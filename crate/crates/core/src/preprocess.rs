//! Preprocessing: EMA trend/noise separation, sliding-window dataset
//! construction, standardization, chronological splitting, and random
//! oversampling.
//!
//! Each feature series is split into a smooth trend channel and a residual
//! noise channel via an exponential moving average; windows stack the trend
//! channels of all features followed by the noise channels, and the label is
//! the RSRP (trend, noise) pair one step past the window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LqeError, Result};
use crate::grade::{grade_of, QualityGrade, GRADE_COUNT};

/// Smoothing factor `alpha = 2 / (tau + 1)` for span coefficient `tau >= 1`.
pub fn smoothing_factor(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau < 1.0 {
        return Err(LqeError::Validation(format!(
            "span coefficient tau must be >= 1, got {tau}"
        )));
    }
    Ok(2.0 / (tau + 1.0))
}

/// Per-feature trend and noise channels for one session.
///
/// For every feature `j` and step `t`: `trend[j][t] + noise[j][t]`
/// reconstructs the input value, `trend[j][0]` equals the first value, and
/// `noise[j][0]` is zero.
#[derive(Debug, Clone)]
pub struct DecomposedSeries {
    pub trend: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
    pub tau: f64,
}

impl DecomposedSeries {
    pub fn n_features(&self) -> usize {
        self.trend.len()
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.trend.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reconstructed raw value of feature `j` at step `t`.
    pub fn raw(&self, j: usize, t: usize) -> f64 {
        self.trend[j][t] + self.noise[j][t]
    }
}

/// Split per-feature series into EMA trend and residual noise channels.
///
/// The recurrence restarts at every session boundary, so call this once per
/// session: `trend_0 = x_0`, `trend_t = alpha * x_t + (1 - alpha) * trend_{t-1}`,
/// `noise_t = x_t - trend_t`.
pub fn ema_decompose(series: &[Vec<f64>], tau: f64) -> Result<DecomposedSeries> {
    let alpha = smoothing_factor(tau)?;
    if series.is_empty() || series.iter().any(Vec::is_empty) {
        return Err(LqeError::Validation(
            "ema_decompose requires non-empty series".into(),
        ));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(LqeError::Validation(
            "all feature series must have equal length".into(),
        ));
    }

    let mut trend = Vec::with_capacity(series.len());
    let mut noise = Vec::with_capacity(series.len());
    for values in series {
        let mut t_channel = Vec::with_capacity(len);
        let mut n_channel = Vec::with_capacity(len);
        let mut prev = values[0];
        t_channel.push(prev);
        n_channel.push(0.0);
        for &x in &values[1..] {
            prev = alpha * x + (1.0 - alpha) * prev;
            t_channel.push(prev);
            n_channel.push(x - prev);
        }
        trend.push(t_channel);
        noise.push(n_channel);
    }
    Ok(DecomposedSeries { trend, noise, tau })
}

/// One supervised sample: an `steps x channels` input matrix (trend channels
/// of all features, then noise channels), the next-step RSRP (trend, noise)
/// label, and the grade of the raw next-step RSRP.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    /// Row-major `steps x channels` matrix; row `t` is
    /// `[trend_1..trend_n, noise_1..noise_n]` at window step `t`.
    pub inputs: Vec<f64>,
    pub steps: usize,
    pub channels: usize,
    /// `(trend, noise)` of the RSRP feature at the step after the window.
    pub label: [f64; 2],
    /// Grade of the raw (unstandardized) label RSRP.
    pub label_grade: QualityGrade,
    /// Index of the originating session in the ingestion order.
    pub session_index: usize,
    /// Time index of the label within its session; the window covers
    /// `label_step - steps .. label_step - 1`.
    pub label_step: usize,
}

impl WindowSample {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.inputs[t * self.channels..(t + 1) * self.channels]
    }

    pub fn n_features(&self) -> usize {
        self.channels / 2
    }

    /// Raw RSRP at the final input step (trend + noise). Only meaningful on
    /// unstandardized windows.
    pub fn last_step_rsrp(&self) -> f64 {
        let row = self.row(self.steps - 1);
        row[0] + row[self.n_features()]
    }

    /// Raw RSRP of the label (trend + noise). Only meaningful on
    /// unstandardized windows.
    pub fn label_rsrp(&self) -> f64 {
        self.label[0] + self.label[1]
    }
}

/// Slide a length-`window` window with stride 1 over one session's channels.
///
/// A session of length `L` yields `max(L - window, 0)` samples; sample `k`
/// covers steps `k..k+window-1` and is labelled from step `k+window`.
pub fn build_windows(
    dec: &DecomposedSeries,
    window: usize,
    session_index: usize,
) -> Result<Vec<WindowSample>> {
    if window == 0 {
        return Err(LqeError::Validation("window size must be >= 1".into()));
    }
    let n = dec.n_features();
    let channels = 2 * n;
    let len = dec.len();
    let count = len.saturating_sub(window);

    let mut samples = Vec::with_capacity(count);
    for start in 0..count {
        let mut inputs = Vec::with_capacity(window * channels);
        for t in start..start + window {
            for j in 0..n {
                inputs.push(dec.trend[j][t]);
            }
            for j in 0..n {
                inputs.push(dec.noise[j][t]);
            }
        }
        let label_step = start + window;
        let label = [dec.trend[0][label_step], dec.noise[0][label_step]];
        let label_grade = grade_of(dec.raw(0, label_step))?;
        samples.push(WindowSample {
            inputs,
            steps: window,
            channels,
            label,
            label_grade,
            session_index,
            label_step,
        });
    }
    Ok(samples)
}

/// Per-channel mean and standard deviation fitted on training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

impl Standardizer {
    /// Fit per-channel statistics over all time steps of the given windows.
    ///
    /// Uses the population (divide-by-count) convention; channels whose
    /// deviation is zero up to rounding get a standard deviation of 1.0.
    pub fn fit(windows: &[WindowSample]) -> Result<Standardizer> {
        if windows.len() < 2 {
            return Err(LqeError::Validation(
                "standardizer needs at least 2 training windows".into(),
            ));
        }
        let channels = windows[0].channels;
        let mut sum = vec![0.0; channels];
        let mut count = 0u64;
        for w in windows {
            if w.channels != channels {
                return Err(LqeError::Validation("inconsistent channel counts".into()));
            }
            for t in 0..w.steps {
                for (c, &v) in w.row(t).iter().enumerate() {
                    sum[c] += v;
                }
            }
            count += w.steps as u64;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();

        let mut sq = vec![0.0; channels];
        for w in windows {
            for t in 0..w.steps {
                for (c, &v) in w.row(t).iter().enumerate() {
                    let d = v - mean[c];
                    sq[c] += d * d;
                }
            }
        }
        let std_dev: Vec<f64> = sq
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| {
                let sd = (s / count as f64).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, std_dev })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Channel indices whose statistics scale the label pair: the RSRP trend
    /// channel and the RSRP noise channel.
    fn label_channels(&self) -> (usize, usize) {
        (0, self.channels() / 2)
    }

    /// Standardize window inputs channel-wise and the label with the RSRP
    /// trend/noise channel statistics.
    pub fn apply(&self, windows: &[WindowSample]) -> Result<Vec<WindowSample>> {
        let channels = self.channels();
        let (lt, ln) = self.label_channels();
        windows
            .iter()
            .map(|w| {
                if w.channels != channels {
                    return Err(LqeError::Validation(format!(
                        "window has {} channels but the standardizer was fitted on {channels}",
                        w.channels
                    )));
                }
                let mut out = w.clone();
                for t in 0..w.steps {
                    let base = t * channels;
                    for c in 0..channels {
                        out.inputs[base + c] = (w.inputs[base + c] - self.mean[c]) / self.std_dev[c];
                    }
                }
                out.label = [
                    (w.label[0] - self.mean[lt]) / self.std_dev[lt],
                    (w.label[1] - self.mean[ln]) / self.std_dev[ln],
                ];
                Ok(out)
            })
            .collect()
    }

    pub fn standardize_value(&self, channel: usize, value: f64) -> f64 {
        (value - self.mean[channel]) / self.std_dev[channel]
    }

    pub fn invert_value(&self, channel: usize, value: f64) -> f64 {
        value * self.std_dev[channel] + self.mean[channel]
    }

    /// De-standardize a predicted (trend, noise) pair back to dBm.
    pub fn invert_label(&self, label: [f64; 2]) -> [f64; 2] {
        let (lt, ln) = self.label_channels();
        [self.invert_value(lt, label[0]), self.invert_value(ln, label[1])]
    }

    /// Standardize a raw (trend, noise) label pair.
    pub fn standardize_label(&self, label: [f64; 2]) -> [f64; 2] {
        let (lt, ln) = self.label_channels();
        [
            self.standardize_value(lt, label[0]),
            self.standardize_value(ln, label[1]),
        ]
    }
}

/// Relative train:validation:test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatio {
    pub train: u32,
    pub validation: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio {
            train: 7,
            validation: 2,
            test: 1,
        }
    }
}

impl SplitRatio {
    pub fn total(&self) -> u32 {
        self.train + self.validation + self.test
    }
}

impl std::str::FromStr for SplitRatio {
    type Err = LqeError;

    fn from_str(s: &str) -> Result<SplitRatio> {
        let parts: Vec<&str> = s.split(':').collect();
        let invalid = || LqeError::Validation(format!("split ratio must look like `7:2:1`, got `{s}`"));
        if parts.len() != 3 {
            return Err(invalid());
        }
        let mut nums = [0u32; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part.parse().map_err(|_| invalid())?;
            if *slot == 0 {
                return Err(LqeError::Validation(format!(
                    "split ratio parts must be >= 1, got `{s}`"
                )));
            }
        }
        Ok(SplitRatio {
            train: nums[0],
            validation: nums[1],
            test: nums[2],
        })
    }
}

impl std::fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.validation, self.test)
    }
}

/// Disjoint train/validation/test window sets.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<WindowSample>,
    pub validation: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

/// Chronological split over the window sequence: the first `train` share of
/// windows, then `validation`, with the remainder as test.
///
/// Counts use floor for train and validation and give the remainder to test.
pub fn split_dataset(windows: Vec<WindowSample>, ratio: &SplitRatio) -> Result<DatasetSplit> {
    if windows.len() < 10 {
        return Err(LqeError::Validation(format!(
            "need at least 10 windows to split, got {}",
            windows.len()
        )));
    }
    let total = ratio.total() as f64;
    let n = windows.len();
    let n_train = (n as f64 * ratio.train as f64 / total).floor() as usize;
    let n_val = (n as f64 * ratio.validation as f64 / total).floor() as usize;

    let mut windows = windows;
    let test = windows.split_off(n_train + n_val);
    let validation = windows.split_off(n_train);
    Ok(DatasetSplit {
        train: windows,
        validation,
        test,
    })
}

/// Random oversampling: duplicate minority-grade windows (uniformly, with
/// replacement, deterministic per seed) until every represented grade
/// matches the majority grade's count.
///
/// The input order is preserved; duplicates are appended.
pub fn oversample(windows: &[WindowSample], seed: u64) -> Result<Vec<WindowSample>> {
    if windows.is_empty() {
        return Err(LqeError::Validation("cannot oversample an empty set".into()));
    }
    let mut by_grade: [Vec<usize>; GRADE_COUNT] = Default::default();
    for (i, w) in windows.iter().enumerate() {
        by_grade[w.label_grade.index()].push(i);
    }
    let majority = by_grade.iter().map(Vec::len).max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = windows.to_vec();
    for members in by_grade.iter().filter(|m| !m.is_empty()) {
        for _ in members.len()..majority {
            let pick = members[rng.random_range(0..members.len())];
            out.push(windows[pick].clone());
        }
    }
    Ok(out)
}

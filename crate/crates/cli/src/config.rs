//! Run configuration: presets, flag overrides, and the effective-config
//! record that makes a run reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lqe_core::preprocess::SplitRatio;
use lqe_core::{LqeError, Result};

/// Named hyperparameter bundles.
///
/// `paper` pins the full-scale settings (window 370, two 128-unit layers,
/// up to 1000 epochs, patience 50); `desk` shrinks the window, hidden size,
/// and epoch budget so a run finishes in minutes on a laptop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

/// Fully resolved settings for a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub traces: Vec<PathBuf>,
    pub tau: f64,
    pub window: usize,
    pub hidden: usize,
    pub layers: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub patience: usize,
    pub delta: f64,
    pub seed: u64,
    pub split: SplitRatio,
}

impl Preset {
    pub fn base(self) -> RunConfig {
        match self {
            Preset::Paper => RunConfig {
                traces: Vec::new(),
                tau: 120.0,
                window: 370,
                hidden: 128,
                layers: 2,
                lr: 0.001,
                batch: 128,
                epochs: 1000,
                dropout: 0.266,
                patience: 50,
                delta: -0.0001,
                seed: 0,
                split: SplitRatio::default(),
            },
            Preset::Desk => RunConfig {
                window: 30,
                hidden: 16,
                epochs: 15,
                patience: 8,
                ..Preset::Paper.base()
            },
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.traces.is_empty() {
            return Err(LqeError::Validation(
                "no input traces: pass trace CSV paths or --config".into(),
            ));
        }
        if self.window == 0 {
            return Err(LqeError::Validation("--window must be >= 1".into()));
        }
        if !(self.tau.is_finite() && self.tau >= 1.0) {
            return Err(LqeError::Validation("--tau must be >= 1".into()));
        }
        if self.hidden == 0 || self.layers == 0 {
            return Err(LqeError::Validation("--hidden and --layers must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(LqeError::Validation("--patience must be >= 1".into()));
        }
        Ok(())
    }

    /// Key/value record of everything that determines the computation.
    /// Feeding it back through `--config` reproduces the run bit-for-bit.
    pub fn effective_record(&self) -> String {
        let mut out = String::new();
        out.push_str("# lqe train effective configuration\n");
        out.push_str("# re-run with `lqe train --config <this file>` to reproduce\n");
        out.push_str(&self.record_body());
        out
    }

    /// The key/value lines of the effective record, without comments.
    pub fn record_body(&self) -> String {
        let mut out = String::new();
        for trace in &self.traces {
            let _ = writeln!(out, "trace = {}", trace.display());
        }
        let _ = writeln!(out, "tau = {}", self.tau);
        let _ = writeln!(out, "window = {}", self.window);
        let _ = writeln!(out, "hidden = {}", self.hidden);
        let _ = writeln!(out, "layers = {}", self.layers);
        let _ = writeln!(out, "lr = {}", self.lr);
        let _ = writeln!(out, "batch = {}", self.batch);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "dropout = {}", self.dropout);
        let _ = writeln!(out, "patience = {}", self.patience);
        let _ = writeln!(out, "delta = {}", self.delta);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "split = {}", self.split);
        out
    }

    /// Parse an effective-config record written by [`Self::effective_record`].
    pub fn from_record(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Preset::Desk.base();
        config.traces.clear();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(LqeError::Validation(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                LqeError::Validation(format!(
                    "{}:{}: invalid {what} value `{value}`",
                    path.display(),
                    lineno + 1
                ))
            };
            match key {
                "trace" => config.traces.push(PathBuf::from(value)),
                "tau" => config.tau = value.parse().map_err(|_| bad("tau"))?,
                "window" => config.window = value.parse().map_err(|_| bad("window"))?,
                "hidden" => config.hidden = value.parse().map_err(|_| bad("hidden"))?,
                "layers" => config.layers = value.parse().map_err(|_| bad("layers"))?,
                "lr" => config.lr = value.parse().map_err(|_| bad("lr"))?,
                "batch" => config.batch = value.parse().map_err(|_| bad("batch"))?,
                "epochs" => config.epochs = value.parse().map_err(|_| bad("epochs"))?,
                "dropout" => config.dropout = value.parse().map_err(|_| bad("dropout"))?,
                "patience" => config.patience = value.parse().map_err(|_| bad("patience"))?,
                "delta" => config.delta = value.parse().map_err(|_| bad("delta"))?,
                "seed" => config.seed = value.parse().map_err(|_| bad("seed"))?,
                "split" => config.split = value.parse()?,
                other => {
                    return Err(LqeError::Validation(format!(
                        "{}:{}: unknown config key `{other}`",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Ok(config)
    }
}

/// Seed fallback from the environment when neither a flag nor a config file
/// supplied one.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var("LQE_SEED") {
        Ok(raw) => {
            let seed = raw.parse().map_err(|_| {
                LqeError::Validation(format!("LQE_SEED must be an unsigned integer, got `{raw}`"))
            })?;
            Ok(Some(seed))
        }
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips() {
        let mut config = Preset::Desk.base();
        config.traces = vec![PathBuf::from("a.csv"), PathBuf::from("b.csv")];
        config.seed = 99;
        config.delta = -0.0001;
        let record = config.effective_record();

        let dir = std::env::temp_dir().join("lqe-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("effective-config.txt");
        std::fs::write(&path, &record).unwrap();
        let back = RunConfig::from_record(&path).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn presets_differ_only_in_scale() {
        let desk = Preset::Desk.base();
        let paper = Preset::Paper.base();
        assert_eq!(desk.tau, paper.tau);
        assert_eq!(desk.lr, paper.lr);
        assert_eq!(desk.dropout, paper.dropout);
        assert!(desk.window < paper.window);
        assert!(desk.hidden < paper.hidden);
        assert!(desk.epochs < paper.epochs);
    }

    #[test]
    fn desk_preset_pins_ci_scale_settings() {
        let desk = Preset::Desk.base();
        assert_eq!(desk.window, 30);
        assert_eq!(desk.hidden, 16);
        assert_eq!(desk.layers, 2);
        assert_eq!(desk.epochs, 15);
        assert_eq!(desk.patience, 8);
        assert_eq!(desk.batch, 128);
    }

    #[test]
    fn paper_preset_pins_published_settings() {
        let paper = Preset::Paper.base();
        assert_eq!(paper.tau, 120.0);
        assert_eq!(paper.window, 370);
        assert_eq!(paper.hidden, 128);
        assert_eq!(paper.layers, 2);
        assert_eq!(paper.lr, 0.001);
        assert_eq!(paper.batch, 128);
        assert_eq!(paper.epochs, 1000);
        assert_eq!(paper.dropout, 0.266);
        assert_eq!(paper.patience, 50);
        assert_eq!(paper.delta, -0.0001);
        assert_eq!(paper.split, SplitRatio::default());
    }
}

//! `lqe`: synthesize link-metric traces, train the forecaster, evaluate,
//! and predict next-second link quality grades.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use lqe_core::lstm::{load_model, save_model, LstmModel, ModelDims, TrainHyper};
use lqe_core::pipeline::{evaluate_model, predict_windows, prepare, window_traces, PipelineConfig};
use lqe_core::trace::{
    generate_synthetic_trace, parse_trace_csv, write_trace_csv, FeatureSynthSpec, SessionTrace,
    SyntheticSpec, FEATURE_NAMES,
};
use lqe_core::training::{train, EarlyStopConfig};
use lqe_core::{LqeError, Result};

use config::{env_seed, Preset, RunConfig};

const MODEL_FILE: &str = "model.lqem";
const TRAIN_REPORT_FILE: &str = "train-report.txt";
const CONFIG_FILE: &str = "effective-config.txt";
const EVAL_REPORT_FILE: &str = "eval-report.txt";

#[derive(Parser)]
#[command(
    name = "lqe",
    version,
    about = "Forecast next-second cellular link quality from RSRP/SINR traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic AR(1) Gaussian trace in the standard CSV format
    Synth(SynthArgs),
    /// Train a forecasting model on one or more trace CSVs
    Train(TrainArgs),
    /// Evaluate a trained model against a trace
    Evaluate(EvaluateArgs),
    /// Emit per-window next-step forecasts for a trace
    Predict(PredictArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of 1 Hz records to generate
    #[arg(long, default_value_t = 5000)]
    length: usize,
    /// RNG seed (falls back to $LQE_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long, default_value = "synthetic.csv")]
    out: PathBuf,
    /// Session id written to every row
    #[arg(long, default_value = "synthetic-0")]
    session_id: String,
    #[arg(long, default_value_t = -87.17, allow_hyphen_values = true)]
    rsrp_mean: f64,
    #[arg(long, default_value_t = 14.94)]
    rsrp_sd: f64,
    /// RSRP first-order autocorrelation in [0, 1)
    #[arg(long, default_value_t = 0.99)]
    rsrp_rho: f64,
    #[arg(long, default_value_t = 8.62, allow_hyphen_values = true)]
    sinr_mean: f64,
    #[arg(long, default_value_t = 9.67)]
    sinr_sd: f64,
    /// SINR first-order autocorrelation in [0, 1)
    #[arg(long, default_value_t = 0.95)]
    sinr_rho: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Input trace CSV paths
    traces: Vec<PathBuf>,
    /// Hyperparameter preset to start from (defaults to the full-scale
    /// `paper` settings; `desk` is the fast configuration)
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Load a previously written effective-config record
    #[arg(long)]
    config: Option<PathBuf>,
    /// EMA span coefficient
    #[arg(long)]
    tau: Option<f64>,
    /// Sliding window length N
    #[arg(long)]
    window: Option<usize>,
    /// Hidden units per recurrent layer
    #[arg(long)]
    hidden: Option<usize>,
    /// Number of recurrent layers
    #[arg(long)]
    layers: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size
    #[arg(long)]
    batch: Option<usize>,
    /// Maximum training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Dropout rate in [0, 1)
    #[arg(long)]
    dropout: Option<f64>,
    /// Early-stopping patience in epochs
    #[arg(long)]
    patience: Option<usize>,
    /// Early-stopping improvement delta
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// RNG seed (falls back to $LQE_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// train:validation:test ratio, e.g. 7:2:1
    #[arg(long)]
    split: Option<String>,
    /// Output directory (defaults to `lqe-run-<unix seconds>`)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Trace CSV to evaluate on
    #[arg(long)]
    trace: PathBuf,
    /// Output directory for the report
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Trace CSV to forecast over
    #[arg(long)]
    trace: PathBuf,
    /// Forecast horizon in time slots (only 1 is supported)
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Output CSV path
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let spec = SyntheticSpec {
        session_id: args.session_id,
        length: args.length,
        features: vec![
            FeatureSynthSpec::new(FEATURE_NAMES[0], args.rsrp_mean, args.rsrp_sd, args.rsrp_rho),
            FeatureSynthSpec::new(FEATURE_NAMES[1], args.sinr_mean, args.sinr_sd, args.sinr_rho),
        ],
        seed,
    };
    let trace = generate_synthetic_trace(&spec)?;
    let file = fs::File::create(&args.out)?;
    write_trace_csv(std::slice::from_ref(&trace), file)?;
    println!("wrote {} records to {}", trace.len(), args.out.display());
    Ok(())
}

fn resolve_train_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            if args.preset.is_some() {
                return Err(LqeError::Validation(
                    "--preset and --config are mutually exclusive".into(),
                ));
            }
            RunConfig::from_record(path)?
        }
        None => args.preset.unwrap_or(Preset::Paper).base(),
    };

    if !args.traces.is_empty() {
        config.traces = args.traces.clone();
    }
    if let Some(v) = args.tau {
        config.tau = v;
    }
    if let Some(v) = args.window {
        config.window = v;
    }
    if let Some(v) = args.hidden {
        config.hidden = v;
    }
    if let Some(v) = args.layers {
        config.layers = v;
    }
    if let Some(v) = args.lr {
        config.lr = v;
    }
    if let Some(v) = args.batch {
        config.batch = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.dropout {
        config.dropout = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.delta {
        config.delta = v;
    }
    if let Some(ref v) = args.split {
        config.split = v.parse()?;
    }
    match args.seed {
        Some(s) => config.seed = s,
        None if args.config.is_none() => {
            if let Some(s) = env_seed()? {
                config.seed = s;
            }
        }
        None => {}
    }
    config.validate()?;
    Ok(config)
}

/// Parse every trace file, keeping session order and rejecting session ids
/// that appear in more than one file.
fn read_traces(paths: &[PathBuf]) -> Result<Vec<SessionTrace>> {
    let mut traces: Vec<SessionTrace> = Vec::new();
    for path in paths {
        let file = fs::File::open(path).map_err(|e| {
            LqeError::Validation(format!("cannot open trace `{}`: {e}", path.display()))
        })?;
        for trace in parse_trace_csv(file)? {
            if traces.iter().any(|t| t.session_id == trace.session_id) {
                return Err(LqeError::Validation(format!(
                    "session `{}` appears in more than one input file",
                    trace.session_id
                )));
            }
            traces.push(trace);
        }
    }
    Ok(traces)
}

fn default_run_dir() -> PathBuf {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from(format!("lqe-run-{secs}"))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = resolve_train_config(&args)?;
    let out_dir = args.out.clone().unwrap_or_else(default_run_dir);
    fs::create_dir_all(&out_dir)?;

    let traces = read_traces(&config.traces)?;
    let prepared = prepare(
        &traces,
        &PipelineConfig {
            tau: config.tau,
            window: config.window,
            split: config.split,
            seed: config.seed,
        },
    )?;

    let n_features = traces[0].n_features();
    let dims = ModelDims::new(n_features, config.hidden, config.layers)?;
    let hyper = TrainHyper {
        learning_rate: config.lr,
        batch_size: config.batch,
        max_epochs: config.epochs,
        dropout_rate: config.dropout,
        seed: config.seed,
        ..TrainHyper::default()
    };
    let early = EarlyStopConfig {
        patience: config.patience,
        min_delta: config.delta,
    };

    println!(
        "training on {} windows ({} validation), window={} hidden={} layers={}",
        prepared.split.train.len(),
        prepared.split.validation.len(),
        config.window,
        config.hidden,
        config.layers
    );
    let (params, history) = train(dims, &hyper, early, &prepared.split)?;

    let model = LstmModel {
        params,
        standardizer: prepared.standardizer,
        window: config.window,
        tau: config.tau,
    };
    fs::write(out_dir.join(MODEL_FILE), save_model(&model)?)?;
    fs::write(out_dir.join(CONFIG_FILE), config.effective_record())?;
    let report = report::train_report(
        &config,
        traces.len(),
        prepared.split.train.len(),
        prepared.split.validation.len(),
        prepared.split.test.len(),
        &history,
        MODEL_FILE,
    );
    fs::write(out_dir.join(TRAIN_REPORT_FILE), report)?;

    println!(
        "stopped at epoch {} (best epoch {}, validation loss {}); outputs in {}",
        history.stopped_epoch,
        history.best_epoch,
        history.val_loss[history.best_epoch - 1],
        out_dir.display()
    );
    Ok(())
}

fn load_model_file(path: &Path) -> Result<LstmModel> {
    let bytes = fs::read(path)
        .map_err(|e| LqeError::Validation(format!("cannot read model `{}`: {e}", path.display())))?;
    load_model(&bytes)
}

fn windows_for_model(model: &LstmModel, trace_path: &Path) -> Result<Vec<lqe_core::WindowSample>> {
    let traces = read_traces(&[trace_path.to_path_buf()])?;
    for t in &traces {
        if t.n_features() != model.params.dims.n_features {
            return Err(LqeError::Validation(format!(
                "trace `{}` has {} features but the model expects {}",
                t.session_id,
                t.n_features(),
                model.params.dims.n_features
            )));
        }
    }
    window_traces(&traces, model.tau, model.window)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let model = load_model_file(&args.model)?;
    let windows = windows_for_model(&model, &args.trace)?;
    let report = evaluate_model(&model, &windows)?;

    fs::create_dir_all(&args.out)?;
    let text = report::eval_report(&report);
    fs::write(args.out.join(EVAL_REPORT_FILE), &text)?;
    println!(
        "evaluated {} windows: accuracy {:.4} (baseline {:.4}), macro-F1 {:.4}, mse {:.4} dBm^2",
        report.samples, report.accuracy, report.baseline_accuracy, report.macro_f1, report.mse_dbm
    );
    println!("report written to {}", args.out.join(EVAL_REPORT_FILE).display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    if args.horizon != 1 {
        return Err(LqeError::Validation(format!(
            "only --horizon 1 is supported, got {}",
            args.horizon
        )));
    }
    let model = load_model_file(&args.model)?;
    let windows = windows_for_model(&model, &args.trace)?;
    let predictions = predict_windows(&model, &windows)?;

    let mut out = String::from("window,predicted_rsrp_dbm,predicted_grade,actual_rsrp_dbm,actual_grade\n");
    for p in &predictions {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.window_index, p.rsrp_dbm, p.grade, p.actual_rsrp_dbm, p.actual_grade
        ));
    }
    fs::write(&args.out, out)?;
    println!("wrote {} forecasts to {}", predictions.len(), args.out.display());
    Ok(())
}

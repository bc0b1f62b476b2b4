//! Next-second cellular link quality forecasting.
//!
//! The pipeline ingests 1 Hz RSRP/SINR drive-test traces grouped into
//! sessions, zero-imputes missing values, splits every feature into an
//! exponential-moving-average trend channel plus a residual noise channel,
//! and slides fixed-length windows over the channels. A from-scratch
//! two-layer LSTM with a linear head regresses the next-step RSRP trend and
//! noise; their sum is binned into one of five link quality grades.
//!
//! Modules:
//! - [`trace`]: CSV ingestion/serialization, imputation, synthetic AR(1) traces
//! - [`preprocess`]: EMA decomposition, windowing, standardization, splits, oversampling
//! - [`lstm`]: the network, loss, BPTT, Adam, gradient checking, model files
//! - [`training`]: epoch loop with early stopping and best-checkpoint selection
//! - [`grade`]: RSRP-to-grade binning
//! - [`metrics`]: confusion matrix, accuracy, macro-F1, persistence baseline
//! - [`pipeline`]: end-to-end preparation, evaluation, and prediction

pub mod error;
pub mod grade;
pub mod lstm;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
mod seed;
pub mod trace;
pub mod training;

pub use error::{LqeError, Result};
pub use grade::{grade_of, recombine, QualityGrade, BIN_THRESHOLDS_DBM, GRADE_COUNT};
pub use lstm::{LstmModel, LstmParams, ModelDims, TrainHyper};
pub use metrics::EvalReport;
pub use preprocess::{DatasetSplit, SplitRatio, Standardizer, WindowSample};
pub use trace::{MetricRecord, SessionTrace, SyntheticSpec};
pub use training::{EarlyStopConfig, TrainHistory};

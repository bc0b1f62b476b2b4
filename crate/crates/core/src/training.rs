//! Epoch loop: shuffled mini-batches, per-epoch validation, early stopping,
//! and best-checkpoint selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LqeError, Result};
use crate::lstm::{
    adam_step, backward, forward, pair_loss, AdamState, DropoutMode, LstmParams, ModelDims,
    TrainHyper,
};
use crate::preprocess::DatasetSplit;
use crate::seed::mix_seed;

/// Gradient clipping bound on the global (all-parameter) norm; guards long
/// unrolls against explosion.
pub const GRAD_CLIP_NORM: f64 = 5.0;

const STREAM_DROPOUT: u64 = 0xd501;
const STREAM_SHUFFLE: u64 = 0x5aff;

/// Early-stopping settings: stop after `patience` consecutive epochs
/// without improvement, where an epoch improves when
/// `best - val_loss > min_delta`.
///
/// The default `min_delta` is negative, so a worsening smaller than 1e-4
/// still counts as improvement and resets the patience counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopConfig {
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig {
            patience: 50,
            min_delta: -0.0001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience bookkeeping. `best_loss` tracks the minimum validation loss
/// seen; the improvement test compares against it with `min_delta` slack.
#[derive(Debug, Clone)]
pub struct EarlyStopState {
    pub best_loss: f64,
    /// 1-based epoch of the minimum; 0 before any update.
    pub best_epoch: usize,
    /// Consecutive non-improving epochs.
    pub counter: usize,
    pub config: EarlyStopConfig,
}

impl EarlyStopState {
    pub fn new(config: EarlyStopConfig) -> EarlyStopState {
        EarlyStopState {
            best_loss: f64::INFINITY,
            best_epoch: 0,
            counter: 0,
            config,
        }
    }

    /// Record one epoch's validation loss and decide whether to stop.
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        let improved = self.best_loss - val_loss > self.config.min_delta;
        if improved {
            self.counter = 0;
        } else {
            self.counter += 1;
        }
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
        }
        if self.counter >= self.config.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Per-epoch losses and the checkpoint bookkeeping of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Mean per-sample training loss per epoch (1-based epochs, index 0 = epoch 1).
    pub train_loss: Vec<f64>,
    /// Full-validation MSE per epoch, evaluated with dropout disabled.
    pub val_loss: Vec<f64>,
    /// Epoch whose parameter snapshot is returned (argmin of `val_loss`).
    pub best_epoch: usize,
    /// Last epoch that ran.
    pub stopped_epoch: usize,
}

/// Train a fresh network on the split and return the parameter snapshot
/// with the minimum validation loss, plus the full history.
///
/// Mini-batch order reshuffles every epoch, deterministically from
/// `(hyper.seed, epoch)`; dropout noise comes from its own seeded stream, so
/// identical inputs give bit-identical results.
pub fn train(
    dims: ModelDims,
    hyper: &TrainHyper,
    early: EarlyStopConfig,
    split: &DatasetSplit,
) -> Result<(LstmParams, TrainHistory)> {
    hyper.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(LqeError::Validation(
            "training needs non-empty train and validation sets".into(),
        ));
    }
    let channels = dims.input_channels();
    for w in split.train.iter().chain(&split.validation) {
        if w.channels != channels {
            return Err(LqeError::Validation(format!(
                "window has {} channels but the model expects {channels}",
                w.channels
            )));
        }
    }

    let mut params = LstmParams::init(dims, hyper.seed);
    let mut adam = AdamState::new(&params);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(hyper.seed, STREAM_DROPOUT));
    let mut stopper = EarlyStopState::new(early);

    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };

    let mut indices: Vec<usize> = (0..split.train.len()).collect();
    for epoch in 1..=hyper.max_epochs {
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(hyper.seed, STREAM_SHUFFLE), epoch as u64));
        indices.shuffle(&mut shuffle_rng);

        let mut epoch_loss_sum = 0.0;
        for batch in indices.chunks(hyper.batch_size) {
            let mut grads = LstmParams::zeros(dims);
            let mut batch_loss_sum = 0.0f64;
            for &i in batch {
                let w = &split.train[i];
                let (pred, cache) = forward(
                    &params,
                    &w.inputs,
                    w.steps,
                    DropoutMode::Enabled {
                        rate: hyper.dropout_rate,
                        rng: &mut dropout_rng,
                    },
                )?;
                batch_loss_sum += pair_loss(pred, w.label);
                grads.add_assign(&backward(&params, &cache, w.label)?);
            }
            if !batch_loss_sum.is_finite() {
                return Err(LqeError::Training(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            epoch_loss_sum += batch_loss_sum;

            // Average over the batch, then clip the global norm.
            grads.scale(1.0 / batch.len() as f64);
            let norm = grads.global_norm();
            if norm > GRAD_CLIP_NORM {
                grads.scale(GRAD_CLIP_NORM / norm);
            }
            adam_step(&mut params, &grads, &mut adam, hyper)
                .map_err(|e| LqeError::Training(format!("epoch {epoch}: {e}")))?;
        }
        history
            .train_loss
            .push(epoch_loss_sum / split.train.len() as f64);

        let val = validation_loss(&params, split)?;
        if !val.is_finite() {
            return Err(LqeError::Training(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        history.val_loss.push(val);
        if val < best_val {
            best_val = val;
            best_params = params.clone();
        }

        history.stopped_epoch = epoch;
        if stopper.update(epoch, val) == StopDecision::Stop {
            break;
        }
    }

    history.best_epoch = stopper.best_epoch;
    Ok((best_params, history))
}

/// Mean per-sample loss over the validation set, dropout disabled.
pub fn validation_loss(params: &LstmParams, split: &DatasetSplit) -> Result<f64> {
    let mut sum = 0.0;
    for w in &split.validation {
        let (pred, _) = forward(params, &w.inputs, w.steps, DropoutMode::Disabled)?;
        sum += pair_loss(pred, w.label);
    }
    Ok(sum / split.validation.len() as f64)
}

//! From-scratch two-layer LSTM regressor with a 2-output linear head.
//!
//! The network consumes standardized `steps x 2n` windows (trend channels,
//! then noise channels) and predicts the standardized RSRP (trend, noise)
//! pair one step ahead. Everything is double precision: forward, exact
//! backpropagation through time, Adam, and the serialized format.
//!
//! Cell equations are the standard formulation: sigmoid input/forget/output
//! gates, tanh candidate, tanh cell output. Hidden and cell state start at
//! zero for every window; no state is carried across windows.

mod adam;
mod gradcheck;
mod model_io;
mod net;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, gradient_check_tensors};
pub use model_io::{load_model, save_model, LstmModel, MODEL_MAGIC, MODEL_VERSION};
pub use net::{backward, forward, mse_loss, pair_loss, DropoutMode, ForwardCache};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LqeError, Result};

/// Gate block order within every `4H` row group: input, forget, candidate, output.
pub(crate) const GATES: usize = 4;

/// Network shape: `n_features` input features (2n input channels), `hidden`
/// units per recurrent layer, `layers` stacked layers, 2 outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub n_features: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl ModelDims {
    pub fn new(n_features: usize, hidden: usize, layers: usize) -> Result<ModelDims> {
        if n_features == 0 || hidden == 0 || layers == 0 {
            return Err(LqeError::Validation(format!(
                "model dimensions must be positive, got n_features={n_features}, hidden={hidden}, layers={layers}"
            )));
        }
        Ok(ModelDims {
            n_features,
            hidden,
            layers,
        })
    }

    /// Number of input channels: trend + noise per feature.
    pub fn input_channels(&self) -> usize {
        2 * self.n_features
    }

    /// Input width of layer `layer`: the window channels for layer 0,
    /// the hidden size above.
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_channels()
        } else {
            self.hidden
        }
    }
}

/// Weights of one recurrent layer.
///
/// `w_ih` is `[4H x D]`, `w_hh` is `[4H x H]`, `bias` is `[4H]`, all
/// row-major with the gate order input/forget/candidate/output.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Full parameter set; also serves as the gradient container, since
/// gradients are shaped identically.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub dims: ModelDims,
    pub layers: Vec<LayerParams>,
    /// `[2 x H]` output head weights.
    pub head_w: Vec<f64>,
    /// `[2]` output head bias.
    pub head_b: Vec<f64>,
}

impl LstmParams {
    /// All-zero parameters (gradient accumulators, moment buffers).
    pub fn zeros(dims: ModelDims) -> LstmParams {
        let layers = (0..dims.layers)
            .map(|l| {
                let d = dims.layer_input(l);
                LayerParams {
                    w_ih: vec![0.0; GATES * dims.hidden * d],
                    w_hh: vec![0.0; GATES * dims.hidden * dims.hidden],
                    bias: vec![0.0; GATES * dims.hidden],
                }
            })
            .collect();
        LstmParams {
            dims,
            layers,
            head_w: vec![0.0; 2 * dims.hidden],
            head_b: vec![0.0; 2],
        }
    }

    /// Seeded initialization: weights uniform in +-1/sqrt(fan_in), biases
    /// zero except the forget gate at 1.0.
    pub fn init(dims: ModelDims, seed: u64) -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = LstmParams::zeros(dims);
        let hidden = dims.hidden;
        for (l, layer) in params.layers.iter_mut().enumerate() {
            let fan_ih = dims.layer_input(l) as f64;
            let bound_ih = 1.0 / fan_ih.sqrt();
            for w in layer.w_ih.iter_mut() {
                *w = rng.random_range(-bound_ih..bound_ih);
            }
            let bound_hh = 1.0 / (hidden as f64).sqrt();
            for w in layer.w_hh.iter_mut() {
                *w = rng.random_range(-bound_hh..bound_hh);
            }
            // Forget-gate bias starts open so gradients reach early steps.
            for b in &mut layer.bias[hidden..2 * hidden] {
                *b = 1.0;
            }
        }
        let bound_head = 1.0 / (hidden as f64).sqrt();
        for w in params.head_w.iter_mut() {
            *w = rng.random_range(-bound_head..bound_head);
        }
        params
    }

    /// Parameter tensors in serialization order: per layer `w_ih`, `w_hh`,
    /// `bias`; then `head_w`, `head_b`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &self.layers {
            t.push(&layer.w_ih);
            t.push(&layer.w_hh);
            t.push(&layer.bias);
        }
        t.push(&self.head_w);
        t.push(&self.head_b);
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut t: Vec<&mut Vec<f64>> = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &mut self.layers {
            t.push(&mut layer.w_ih);
            t.push(&mut layer.w_hh);
            t.push(&mut layer.bias);
        }
        t.push(&mut self.head_w);
        t.push(&mut self.head_b);
        t
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Elementwise `self += other`; shapes must agree.
    pub fn add_assign(&mut self, other: &LstmParams) {
        debug_assert_eq!(self.dims, other.dims);
        for (mine, theirs) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    /// Elementwise scale.
    pub fn scale(&mut self, factor: f64) {
        for tensor in self.tensors_mut() {
            for v in tensor.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Euclidean norm over all parameters (used for gradient clipping).
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Shape compatibility with another parameter set (for adam/backward).
    pub fn same_shape(&self, other: &LstmParams) -> bool {
        self.dims == other.dims
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 0.001,
            batch_size: 128,
            max_epochs: 1000,
            dropout_rate: 0.266,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(LqeError::Validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(LqeError::Validation(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(LqeError::Validation(
                "batch size and max epochs must be >= 1".into(),
            ));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(LqeError::Validation(format!("{name} must be in [0, 1)")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(LqeError::Validation("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let dims = ModelDims::new(2, 8, 2).unwrap();
        let a = LstmParams::init(dims, 3);
        let b = LstmParams::init(dims, 3);
        assert_eq!(a, b);
        assert_ne!(a, LstmParams::init(dims, 4));

        assert_eq!(a.layers[0].w_ih.len(), 32 * 4);
        assert_eq!(a.layers[1].w_ih.len(), 32 * 8);
        assert_eq!(a.layers[0].w_hh.len(), 32 * 8);
        assert_eq!(a.head_w.len(), 16);
        // Forget-gate bias block is 1.0, the rest zero.
        assert!(a.layers[0].bias[8..16].iter().all(|&b| b == 1.0));
        assert!(a.layers[0].bias[..8].iter().all(|&b| b == 0.0));
        assert!(a.layers[0].bias[16..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn dims_reject_zero() {
        assert!(ModelDims::new(0, 4, 1).is_err());
        assert!(ModelDims::new(2, 0, 1).is_err());
        assert!(ModelDims::new(2, 4, 0).is_err());
    }

    #[test]
    fn scale_and_norm() {
        let dims = ModelDims::new(1, 2, 1).unwrap();
        let mut p = LstmParams::zeros(dims);
        p.head_b = vec![3.0, 4.0];
        assert_eq!(p.global_norm(), 5.0);
        p.scale(2.0);
        assert_eq!(p.head_b, vec![6.0, 8.0]);
    }

    #[test]
    fn hyper_defaults_validate() {
        assert!(TrainHyper::default().validate().is_ok());
        let bad = TrainHyper {
            dropout_rate: 1.0,
            ..TrainHyper::default()
        };
        assert!(bad.validate().is_err());
    }
}

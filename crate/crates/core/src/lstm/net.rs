//! Forward pass, loss, and exact backpropagation through time.

use rand::{Rng, RngCore};

use crate::error::{LqeError, Result};

use super::{LstmParams, GATES};

/// Dropout behaviour for one forward pass.
///
/// When enabled, an inverted-dropout mask (factor `1/(1-rate)` for kept
/// units) is drawn per layer, per time step, and applied to the layer's
/// hidden output on the non-recurrent path only: the recurrence always sees
/// the undropped state, so evaluation needs no rescaling.
pub enum DropoutMode<'a> {
    Disabled,
    Enabled { rate: f64, rng: &'a mut dyn RngCore },
}

/// Activations recorded by [`forward`] for one window, consumed by
/// [`backward`].
pub struct ForwardCache {
    steps: usize,
    pub prediction: [f64; 2],
    layers: Vec<LayerCache>,
}

struct LayerCache {
    /// `[steps x D]` rows consumed by this layer (post-dropout of the layer below).
    input: Vec<f64>,
    /// `[steps x 4H]` activated gate values (input, forget, candidate, output).
    gates: Vec<f64>,
    /// `[steps x H]` cell state.
    cell: Vec<f64>,
    /// `[steps x H]` tanh of the cell state.
    tanh_cell: Vec<f64>,
    /// `[steps x H]` hidden state before dropout.
    hidden: Vec<f64>,
    /// `[steps x H]` inverted-dropout factors for the vertical output.
    mask: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Run the network over one `steps x 2n` window and predict the
/// standardized (trend, noise) pair one step ahead.
///
/// Hidden and cell state start at zero; nothing carries across calls.
pub fn forward(
    params: &LstmParams,
    inputs: &[f64],
    steps: usize,
    mut mode: DropoutMode<'_>,
) -> Result<([f64; 2], ForwardCache)> {
    let dims = params.dims;
    let channels = dims.input_channels();
    if steps == 0 || inputs.len() != steps * channels {
        return Err(LqeError::Validation(format!(
            "window shape mismatch: got {} values for {steps} steps x {channels} channels",
            inputs.len()
        )));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(LqeError::Validation("window contains non-finite values".into()));
    }
    if let DropoutMode::Enabled { rate, .. } = mode {
        if !(0.0..1.0).contains(&rate) {
            return Err(LqeError::Validation(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
    }

    let hidden = dims.hidden;
    let mut layers: Vec<LayerCache> = (0..dims.layers)
        .map(|l| {
            let d = dims.layer_input(l);
            LayerCache {
                input: vec![0.0; steps * d],
                gates: vec![0.0; steps * GATES * hidden],
                cell: vec![0.0; steps * hidden],
                tanh_cell: vec![0.0; steps * hidden],
                hidden: vec![0.0; steps * hidden],
                mask: vec![1.0; steps * hidden],
            }
        })
        .collect();

    let mut pre = vec![0.0; GATES * hidden];
    let mut head_input = vec![0.0; hidden];

    for t in 0..steps {
        let mut vertical: Vec<f64> = inputs[t * channels..(t + 1) * channels].to_vec();
        for (l, lc) in layers.iter_mut().enumerate() {
            let d = dims.layer_input(l);
            let weights = &params.layers[l];
            lc.input[t * d..(t + 1) * d].copy_from_slice(&vertical);

            // Pre-activations: bias + W_ih x_t + W_hh h_{t-1}.
            for (u, slot) in pre.iter_mut().enumerate() {
                let mut acc = weights.bias[u];
                let row = &weights.w_ih[u * d..(u + 1) * d];
                for (w, x) in row.iter().zip(&vertical) {
                    acc += w * x;
                }
                if t > 0 {
                    let row = &weights.w_hh[u * hidden..(u + 1) * hidden];
                    let h_prev = &lc.hidden[(t - 1) * hidden..t * hidden];
                    for (w, h) in row.iter().zip(h_prev) {
                        acc += w * h;
                    }
                }
                *slot = acc;
            }

            let base = t * hidden;
            for j in 0..hidden {
                let gi = sigmoid(pre[j]);
                let gf = sigmoid(pre[hidden + j]);
                let gg = pre[2 * hidden + j].tanh();
                let go = sigmoid(pre[3 * hidden + j]);
                let c_prev = if t > 0 { lc.cell[base - hidden + j] } else { 0.0 };
                let c = gf * c_prev + gi * gg;
                let tc = c.tanh();

                let gbase = t * GATES * hidden;
                lc.gates[gbase + j] = gi;
                lc.gates[gbase + hidden + j] = gf;
                lc.gates[gbase + 2 * hidden + j] = gg;
                lc.gates[gbase + 3 * hidden + j] = go;
                lc.cell[base + j] = c;
                lc.tanh_cell[base + j] = tc;
                lc.hidden[base + j] = go * tc;
            }

            if let DropoutMode::Enabled { rate, ref mut rng } = mode {
                if rate > 0.0 {
                    let keep_scale = 1.0 / (1.0 - rate);
                    for j in 0..hidden {
                        let draw: f64 = rng.random();
                        lc.mask[base + j] = if draw < rate { 0.0 } else { keep_scale };
                    }
                }
            }

            vertical = (0..hidden)
                .map(|j| lc.hidden[base + j] * lc.mask[base + j])
                .collect();
        }
        if t == steps - 1 {
            head_input.copy_from_slice(&vertical);
        }
    }

    let mut prediction = [0.0; 2];
    for (k, out) in prediction.iter_mut().enumerate() {
        let mut acc = params.head_b[k];
        for (w, h) in params.head_w[k * hidden..(k + 1) * hidden].iter().zip(&head_input) {
            acc += w * h;
        }
        *out = acc;
    }

    Ok((
        prediction,
        ForwardCache {
            steps,
            prediction,
            layers,
        },
    ))
}

/// Squared-error loss of one prediction pair, averaged over its two
/// components (the per-sample contribution to [`mse_loss`]).
pub fn pair_loss(prediction: [f64; 2], label: [f64; 2]) -> f64 {
    let d0 = prediction[0] - label[0];
    let d1 = prediction[1] - label[1];
    (d0 * d0 + d1 * d1) / 2.0
}

/// Mean squared error over all scalar components of all pairs.
pub fn mse_loss(predictions: &[[f64; 2]], labels: &[[f64; 2]]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(LqeError::Validation(format!(
            "mse_loss needs equal non-zero lengths, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &l)| pair_loss(p, l) * 2.0)
        .sum();
    Ok(sum / (2 * predictions.len()) as f64)
}

/// Exact gradient of the per-sample MSE with respect to every parameter,
/// by backpropagation through time over the cached window.
pub fn backward(params: &LstmParams, cache: &ForwardCache, label: [f64; 2]) -> Result<LstmParams> {
    let dims = params.dims;
    let hidden = dims.hidden;
    let steps = cache.steps;
    if cache.layers.len() != dims.layers
        || cache.layers[0].input.len() != steps * dims.input_channels()
        || cache.layers[0].hidden.len() != steps * hidden
    {
        return Err(LqeError::Validation(
            "forward cache does not match these parameters".into(),
        ));
    }
    if label.iter().any(|v| !v.is_finite()) {
        return Err(LqeError::Validation("label contains non-finite values".into()));
    }

    let mut grads = LstmParams::zeros(dims);

    // d loss / d prediction_k for the component-averaged pair loss.
    let dpred = [
        cache.prediction[0] - label[0],
        cache.prediction[1] - label[1],
    ];

    let top = &cache.layers[dims.layers - 1];
    let last = (steps - 1) * hidden;

    // Head gradients; the head consumed the dropped top hidden state.
    for (k, &dp) in dpred.iter().enumerate() {
        grads.head_b[k] = dp;
        for j in 0..hidden {
            grads.head_w[k * hidden + j] = dp * top.hidden[last + j] * top.mask[last + j];
        }
    }

    // Gradient w.r.t. each layer's dropped (vertical) output, per step.
    let mut dvert = vec![0.0; steps * hidden];
    for j in 0..hidden {
        dvert[last + j] = params.head_w[j] * dpred[0] + params.head_w[hidden + j] * dpred[1];
    }

    let mut d_gates = vec![0.0; GATES * hidden];
    for l in (0..dims.layers).rev() {
        let d = dims.layer_input(l);
        let lc = &cache.layers[l];
        let weights = &params.layers[l];
        let grad_layer = &mut grads.layers[l];

        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dvert_below = if l > 0 { vec![0.0; steps * hidden] } else { Vec::new() };

        for t in (0..steps).rev() {
            let base = t * hidden;
            let gbase = t * GATES * hidden;

            for j in 0..hidden {
                // Vertical gradient arrives w.r.t. the dropped output.
                let dh = dvert[base + j] * lc.mask[base + j] + dh_next[j];
                let go = lc.gates[gbase + 3 * hidden + j];
                let tc = lc.tanh_cell[base + j];
                let dc = dh * go * (1.0 - tc * tc) + dc_next[j];

                let gi = lc.gates[gbase + j];
                let gf = lc.gates[gbase + hidden + j];
                let gg = lc.gates[gbase + 2 * hidden + j];
                let c_prev = if t > 0 { lc.cell[base - hidden + j] } else { 0.0 };

                d_gates[j] = dc * gg * gi * (1.0 - gi);
                d_gates[hidden + j] = dc * c_prev * gf * (1.0 - gf);
                d_gates[2 * hidden + j] = dc * gi * (1.0 - gg * gg);
                d_gates[3 * hidden + j] = dh * tc * go * (1.0 - go);

                dc_next[j] = dc * gf;
            }

            let x_t = &lc.input[t * d..(t + 1) * d];
            for (u, &dg) in d_gates.iter().enumerate() {
                grad_layer.bias[u] += dg;
                let row = &mut grad_layer.w_ih[u * d..(u + 1) * d];
                for (slot, &x) in row.iter_mut().zip(x_t) {
                    *slot += dg * x;
                }
                if t > 0 {
                    let h_prev = &lc.hidden[base - hidden..base];
                    let row = &mut grad_layer.w_hh[u * hidden..(u + 1) * hidden];
                    for (slot, &h) in row.iter_mut().zip(h_prev) {
                        *slot += dg * h;
                    }
                }
            }

            // dh_next = W_hh^T d_gates
            for (j, slot) in dh_next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (u, &dg) in d_gates.iter().enumerate() {
                    acc += weights.w_hh[u * hidden + j] * dg;
                }
                *slot = acc;
            }

            // Gradient w.r.t. this layer's input row = the dropped output of
            // the layer below (the raw window for layer 0, where it is unused).
            if l > 0 {
                let out = &mut dvert_below[t * hidden..(t + 1) * hidden];
                for (j, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (u, &dg) in d_gates.iter().enumerate() {
                        acc += weights.w_ih[u * d + j] * dg;
                    }
                    *slot = acc;
                }
            }
        }

        if l > 0 {
            dvert = dvert_below;
        }
    }

    Ok(grads)
}

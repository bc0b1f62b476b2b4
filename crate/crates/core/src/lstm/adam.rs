//! Adam optimizer with bias correction.

use crate::error::{LqeError, Result};

use super::{LstmParams, TrainHyper};

/// First/second moment accumulators, shaped like the parameters they track.
#[derive(Debug, Clone)]
pub struct AdamState {
    first: LstmParams,
    second: LstmParams,
    /// Completed update count.
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &LstmParams) -> AdamState {
        AdamState {
            first: LstmParams::zeros(params.dims),
            second: LstmParams::zeros(params.dims),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
///
/// `m = b1*m + (1-b1)*g`, `v = b2*v + (1-b2)*g^2`, then
/// `p -= lr * m_hat / (sqrt(v_hat) + eps)` with the usual `1 - b^t`
/// corrections.
pub fn adam_step(
    params: &mut LstmParams,
    grads: &LstmParams,
    state: &mut AdamState,
    hyper: &TrainHyper,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.first) {
        return Err(LqeError::Validation(
            "adam_step shapes disagree between params, grads, and state".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(LqeError::Training("non-finite gradient".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - hyper.beta1.powi(t);
    let correction2 = 1.0 - hyper.beta2.powi(t);

    let mut p_tensors = params.tensors_mut();
    let mut m_tensors = state.first.tensors_mut();
    let mut v_tensors = state.second.tensors_mut();
    let g_tensors = grads.tensors();

    for i in 0..g_tensors.len() {
        let p = &mut p_tensors[i];
        let m = &mut m_tensors[i];
        let v = &mut v_tensors[i];
        let g = g_tensors[i];
        for j in 0..g.len() {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            p[j] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    }
    drop(p_tensors);

    if !params.is_finite() {
        return Err(LqeError::Training(format!(
            "parameters became non-finite at optimizer step {}",
            state.step
        )));
    }
    Ok(())
}

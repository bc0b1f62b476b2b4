//! Central-finite-difference verification of the analytic gradients.

use crate::error::{LqeError, Result};

use super::net::{backward, forward, pair_loss, DropoutMode};
use super::LstmParams;

/// Maximum relative error between the BPTT gradient and central finite
/// differences over every parameter, with dropout disabled.
///
/// The relative error of a pair `(a, b)` is `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn gradient_check(
    params: &mut LstmParams,
    inputs: &[f64],
    steps: usize,
    label: [f64; 2],
    epsilon: f64,
) -> Result<f64> {
    let all: Vec<usize> = (0..params.tensors().len()).collect();
    gradient_check_tensors(params, inputs, steps, label, epsilon, &all)
}

/// [`gradient_check`] restricted to a subset of parameter tensors, indexed
/// in [`LstmParams::tensors`] order (the head tensors are the last two).
pub fn gradient_check_tensors(
    params: &mut LstmParams,
    inputs: &[f64],
    steps: usize,
    label: [f64; 2],
    epsilon: f64,
    tensor_indices: &[usize],
) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(LqeError::Validation(format!(
            "finite-difference step must be positive, got {epsilon}"
        )));
    }
    let tensor_count = params.tensors().len();
    if tensor_indices.iter().any(|&i| i >= tensor_count) {
        return Err(LqeError::Validation(format!(
            "tensor index out of range (have {tensor_count} tensors)"
        )));
    }

    let (_, cache) = forward(params, inputs, steps, DropoutMode::Disabled)?;
    let analytic = backward(params, &cache, label)?;

    let loss_at = |params: &LstmParams| -> Result<f64> {
        let (pred, _) = forward(params, inputs, steps, DropoutMode::Disabled)?;
        Ok(pair_loss(pred, label))
    };

    let mut max_rel = 0.0f64;
    for &ti in tensor_indices {
        let len = params.tensors()[ti].len();
        for j in 0..len {
            let original = params.tensors()[ti][j];
            params.tensors_mut()[ti][j] = original + epsilon;
            let plus = loss_at(params)?;
            params.tensors_mut()[ti][j] = original - epsilon;
            let minus = loss_at(params)?;
            params.tensors_mut()[ti][j] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.tensors()[ti][j];
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::ModelDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(seed: u64) -> (LstmParams, Vec<f64>, [f64; 2]) {
        let dims = ModelDims::new(2, 4, 2).unwrap();
        let params = LstmParams::init(dims, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let window: Vec<f64> = (0..6 * 4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        (params, window, label)
    }

    #[test]
    fn bptt_matches_finite_differences_on_tiny_model() {
        let (mut params, window, label) = random_case(7);
        let err = gradient_check(&mut params, &window, 6, label, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn coarse_step_degrades_the_check() {
        let (mut params, window, label) = random_case(7);
        let fine = gradient_check(&mut params, &window, 6, label, 1e-5).unwrap();
        let coarse = gradient_check(&mut params, &window, 6, label, 1e-1).unwrap();
        assert!(coarse > fine, "coarse {coarse} should exceed fine {fine}");
    }

    #[test]
    fn head_only_check_is_exact_for_the_quadratic() {
        // The loss is quadratic in the head parameters, so central
        // differences are exact up to rounding there.
        let (mut params, window, label) = random_case(3);
        let tensor_count = params.tensors().len();
        let head_only = [tensor_count - 2, tensor_count - 1];
        let err =
            gradient_check_tensors(&mut params, &window, 6, label, 1e-5, &head_only).unwrap();
        assert!(err < 1e-8, "head-only relative error {err}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        let (mut params, window, label) = random_case(1);
        assert!(gradient_check(&mut params, &window, 6, label, 0.0).is_err());
        assert!(gradient_check(&mut params, &window, 6, label, -1e-5).is_err());
    }
}

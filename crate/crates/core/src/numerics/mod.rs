//! Dense tensors, activations, loss, SGD and finite-difference checking.

mod linear;
mod ops;
mod params;
mod rng;
mod tensor;

pub use linear::{linear, linear_backward, LinearGrads};
pub(crate) use linear::{backward as linear_backward_slice, forward as linear_forward_slice};
pub use ops::{argmax, cross_entropy, sigmoid, softmax, tanh_act, PROB_FLOOR};
pub use params::{Param, ParamId, ParamStore};
pub use rng::SeededRng;
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Denominator floor for [`gradient_check`]: coordinates where both the
/// analytic and numeric gradient are below this are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Plain SGD: `value -= learning_rate * grad`, then gradients are zeroed.
pub fn sgd_step(params: &mut ParamStore, learning_rate: f64) -> Result<()> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    for p in params.iter_mut() {
        let Param { value, grad, .. } = p;
        for (v, g) in value.data_mut().iter_mut().zip(grad.data_mut()) {
            *v -= learning_rate * *g;
            *g = 0.0;
        }
    }
    Ok(())
}

/// Compares the analytic gradients already stored in `params` against
/// central differences of `forward`, returning the largest relative error
/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)` over every coordinate.
///
/// `params` values are perturbed in place and restored before returning.
pub fn gradient_check<F>(params: &mut ParamStore, epsilon: f64, mut forward: F) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    assert!(
        (1e-7..=1e-3).contains(&epsilon),
        "epsilon {epsilon} outside [1e-7, 1e-3]"
    );
    let ids: Vec<ParamId> = params.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        for i in 0..params.get(id).value.len() {
            let original = params.get(id).value.data()[i];
            params.get_mut(id).value.data_mut()[i] = original + epsilon;
            let plus = forward(params);
            params.get_mut(id).value.data_mut()[i] = original - epsilon;
            let minus = forward(params);
            params.get_mut(id).value.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = params.get(id).grad.data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

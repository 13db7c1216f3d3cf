use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Logistic function, evaluated without overflow for either sign.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh_act(x: f64) -> f64 {
    x.tanh()
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax cross-entropy for one sample.
///
/// Returns `(loss, d loss / d logits)` where the gradient is
/// `probs - one_hot(target)`.
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= probs.len() {
        return Err(Error::InvalidClass {
            class: target,
            expected: format!("0..{}", probs.len()),
        });
    }
    let p = probs[target].clamp(PROB_FLOOR, 1.0);
    let mut grad = probs.to_vec();
    grad[target] -= 1.0;
    Ok((-p.ln(), grad))
}

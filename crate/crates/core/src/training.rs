//! Mini-batch SGD shared by both learners.

use crate::error::{Error, Result};
use crate::numerics::{sgd_step, softmax, ParamStore, SeededRng};

/// A differentiable classifier over flat `f64` inputs.
pub trait Network {
    fn num_classes(&self) -> usize;

    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    /// Inference-mode logits (the learner's feature vector).
    fn logits(&self, input: &[f64]) -> Result<Vec<f64>>;

    /// Training-mode forward and backward for one sample. Adds the
    /// cross-entropy gradient into the parameter store and returns the loss.
    fn accumulate_gradient(&mut self, input: &[f64], class: usize, rng: &mut SeededRng)
        -> Result<f64>;

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

/// Shuffled mini-batch SGD on the mean batch loss. Returns the mean loss of
/// every epoch. A learning rate of exactly zero leaves parameters untouched.
pub fn train_sgd<N: Network>(
    net: &mut N,
    samples: &[(&[f64], usize)],
    config: &SgdConfig,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be non-negative, got {}",
            config.learning_rate
        )));
    }
    let k = net.num_classes();
    if let Some((_, c)) = samples.iter().find(|(_, c)| *c >= k) {
        return Err(Error::InvalidClass {
            class: *c,
            expected: format!("0..{k}"),
        });
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            net.params_mut().zero_grad();
            for &i in batch {
                let (input, class) = samples[i];
                total += net.accumulate_gradient(input, class, rng)?;
            }
            if config.learning_rate > 0.0 {
                net.params_mut().scale_grad(1.0 / batch.len() as f64);
                sgd_step(net.params_mut(), config.learning_rate)?;
            }
        }
        net.params_mut().zero_grad();
        history.push(total / samples.len() as f64);
    }
    Ok(history)
}

/// Fraction of samples whose argmax prediction matches the class.
pub fn accuracy<N: Network>(net: &N, samples: &[(&[f64], usize)]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for &(input, class) in samples {
        if crate::numerics::argmax(&net.logits(input)?) == class {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

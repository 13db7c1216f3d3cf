use std::sync::Arc;

use crate::cnn::CnnModel;
use crate::error::{Error, Result};
use crate::numerics::{softmax, SeededRng};
use crate::preprocess::{extract_patch, HyperCube, Labeled, Pixel};
use crate::rnn::RnnModel;
use crate::training::{train_sgd, Network, SgdConfig};

/// A learner bound to its own view of the scene.
pub trait ViewLearner: Clone {
    fn num_classes(&self) -> usize;

    /// Continues training on `samples` from the current weights.
    fn fit(&mut self, samples: &[Labeled], rng: &mut SeededRng) -> Result<()>;

    /// Class probabilities and feature vector for one pixel.
    fn infer(&self, pixel: Pixel) -> Result<(Vec<f64>, Vec<f64>)>;

    fn probabilities(&self, pixel: Pixel) -> Result<Vec<f64>> {
        Ok(self.infer(pixel)?.0)
    }
}

fn check_pixel(cube: &HyperCube, p: Pixel) -> Result<()> {
    if cube.contains(p) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "pixel ({}, {}) outside {}x{} scene",
            p.row,
            p.col,
            cube.height(),
            cube.width()
        )))
    }
}

/// The RNN over the normalized spectrum of each pixel.
#[derive(Debug, Clone)]
pub struct SpectralLearner {
    pub model: RnnModel,
    pub cube: Arc<HyperCube>,
    pub sgd: SgdConfig,
}

impl ViewLearner for SpectralLearner {
    fn num_classes(&self) -> usize {
        self.model.config().classes
    }

    fn fit(&mut self, samples: &[Labeled], rng: &mut SeededRng) -> Result<()> {
        for s in samples {
            check_pixel(&self.cube, s.pixel)?;
        }
        let cube = Arc::clone(&self.cube);
        let data: Vec<(&[f64], usize)> = samples
            .iter()
            .map(|s| (cube.spectrum(s.pixel), s.class))
            .collect();
        train_sgd(&mut self.model, &data, &self.sgd, rng)?;
        Ok(())
    }

    fn infer(&self, pixel: Pixel) -> Result<(Vec<f64>, Vec<f64>)> {
        check_pixel(&self.cube, pixel)?;
        let features = self.model.features(self.cube.spectrum(pixel))?;
        Ok((softmax(&features), features))
    }
}

/// The 3-D CNN over a PCA-reduced neighborhood patch of each pixel.
#[derive(Debug, Clone)]
pub struct SpatialLearner {
    pub model: CnnModel,
    pub cube: Arc<HyperCube>,
    pub sgd: SgdConfig,
}

impl SpatialLearner {
    pub fn patch(&self, pixel: Pixel) -> Result<Vec<f64>> {
        check_pixel(&self.cube, pixel)?;
        extract_patch(&self.cube, pixel, self.model.config().patch)
    }
}

impl ViewLearner for SpatialLearner {
    fn num_classes(&self) -> usize {
        self.model.config().classes
    }

    fn fit(&mut self, samples: &[Labeled], rng: &mut SeededRng) -> Result<()> {
        let patches = samples
            .iter()
            .map(|s| self.patch(s.pixel))
            .collect::<Result<Vec<_>>>()?;
        let data: Vec<(&[f64], usize)> = patches
            .iter()
            .zip(samples)
            .map(|(p, s)| (p.as_slice(), s.class))
            .collect();
        train_sgd(&mut self.model, &data, &self.sgd, rng)?;
        Ok(())
    }

    fn infer(&self, pixel: Pixel) -> Result<(Vec<f64>, Vec<f64>)> {
        let features = self.model.logits(&self.patch(pixel)?)?;
        Ok((softmax(&features), features))
    }
}

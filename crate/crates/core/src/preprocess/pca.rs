//! Principal component analysis on pixel spectra.
//!
//! The band covariance is diagonalized with cyclic Jacobi rotations, which
//! is plenty for the few hundred bands a hyperspectral sensor produces.

use crate::error::{Error, Result};

use super::HyperCube;

/// Stop when the off-diagonal Frobenius norm falls below this.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentSelection {
    /// Smallest count whose cumulative explained-variance ratio reaches the target.
    VarianceTarget(f64),
    /// Fixed count.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `p x B`, row-major; rows are orthonormal.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
    total_variance: f64,
}

impl PcaModel {
    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    pub fn num_components(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let b = self.bands();
        &self.components[i * b..(i + 1) * b]
    }

    /// Sum of all band variances before truncation.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Fraction of total variance captured by the kept components.
    pub fn explained_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.explained_variance.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    /// Projects one spectrum onto the components.
    pub fn project(&self, spectrum: &[f64]) -> Vec<f64> {
        (0..self.num_components())
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(spectrum.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Maps component scores back to band space (mean included).
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, s) in scores.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.component(i)) {
                *o += s * c;
            }
        }
        out
    }
}

/// Eigen-decomposition of a symmetric `n x n` matrix (row-major).
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows of an `n x n` matrix.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if matrix.len() != n * n {
        return Err(Error::Shape(format!(
            "expected {n}x{n} matrix, got {} values",
            matrix.len()
        )));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off < JACOBI_TOLERANCE {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &col in &order {
        vectors.extend((0..n).map(|k| v[k * n + col]));
    }
    Ok((values, vectors))
}

/// Band covariance (population normalization) and mean of all pixels.
fn covariance(cube: &HyperCube) -> (Vec<f64>, Vec<f64>) {
    let b = cube.bands();
    let n = cube.num_pixels() as f64;
    let mut mean = vec![0.0; b];
    for s in cube.spectra() {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; b * b];
    let mut centered = vec![0.0; b];
    for s in cube.spectra() {
        for k in 0..b {
            centered[k] = s[k] - mean[k];
        }
        for i in 0..b {
            for j in i..b {
                cov[i * b + j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..b {
        for j in i..b {
            let c = cov[i * b + j] / n;
            cov[i * b + j] = c;
            cov[j * b + i] = c;
        }
    }
    (mean, cov)
}

pub fn pca_fit(cube: &HyperCube, selection: ComponentSelection) -> Result<PcaModel> {
    let b = cube.bands();
    if b == 0 {
        return Err(Error::Shape("cube has no bands".into()));
    }
    if cube.num_pixels() < 2 {
        return Err(Error::InvalidInput("PCA needs at least 2 pixels".into()));
    }
    let (mean, cov) = covariance(cube);
    let (values, vectors) = symmetric_eigen(&cov, b)?;
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();

    let p = match selection {
        ComponentSelection::Count(p) => {
            if p == 0 || p > b {
                return Err(Error::InvalidConfig(format!(
                    "component count {p} outside 1..={b}"
                )));
            }
            p
        }
        ComponentSelection::VarianceTarget(target) => {
            if !(target > 0.0 && target <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "variance target {target} outside (0, 1]"
                )));
            }
            if total <= 0.0 {
                1
            } else {
                let mut cum = 0.0;
                let mut p = b;
                for (i, v) in values.iter().enumerate() {
                    cum += v;
                    if cum / total >= target {
                        p = i + 1;
                        break;
                    }
                }
                p
            }
        }
    };

    Ok(PcaModel {
        mean,
        components: vectors[..p * b].to_vec(),
        explained_variance: values[..p].to_vec(),
        total_variance: total,
    })
}

/// Projects every pixel onto the model's components.
pub fn pca_transform(cube: &HyperCube, model: &PcaModel) -> Result<HyperCube> {
    if cube.bands() != model.bands() {
        return Err(Error::Shape(format!(
            "cube has {} bands, PCA model expects {}",
            cube.bands(),
            model.bands()
        )));
    }
    let mut out = Vec::with_capacity(cube.num_pixels() * model.num_components());
    for s in cube.spectra() {
        out.extend(model.project(s));
    }
    HyperCube::new(cube.height(), cube.width(), model.num_components(), out)
}

//! Synthetic scenes with contiguous class regions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::preprocess::{HyperCube, LabelField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// A near-square grid of rectangular blocks, one per class; leftover
    /// cells are background.
    Blocks,
    /// Contiguous row-major runs sized by the class ratios.
    Stripes,
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blocks" => Ok(Geometry::Blocks),
            "stripes" => Ok(Geometry::Stripes),
            other => Err(Error::InvalidConfig(format!(
                "unknown geometry `{other}` (expected blocks or stripes)"
            ))),
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Blocks => "blocks",
            Geometry::Stripes => "stripes",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    pub geometry: Geometry,
    /// Multiplier on the mean spectra.
    pub mean_scale: f64,
    /// Standard deviation of the per-value Gaussian noise.
    pub noise: f64,
    /// Relative class sizes (stripes only); empty means equal sizes.
    pub ratios: Vec<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            height: 32,
            width: 32,
            bands: 16,
            classes: 4,
            geometry: Geometry::Blocks,
            mean_scale: 1.0,
            noise: 0.05,
            ratios: Vec::new(),
        }
    }
}

/// Splits `total` into counts proportional to `ratios` (largest remainder),
/// so every count is within 1 of its exact share.
pub fn proportional_counts(total: usize, ratios: &[f64]) -> Vec<usize> {
    let sum: f64 = ratios.iter().sum();
    let exact: Vec<f64> = ratios.iter().map(|r| r / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn layout(spec: &SyntheticSpec) -> Result<Vec<u16>> {
    let (h, w, k) = (spec.height, spec.width, spec.classes);
    let mut labels = vec![0u16; h * w];
    match spec.geometry {
        Geometry::Stripes => {
            if k > h {
                return Err(Error::InvalidConfig(format!(
                    "{k} stripes do not fit in {h} rows"
                )));
            }
            let ratios = if spec.ratios.is_empty() { vec![1.0; k] } else { spec.ratios.clone() };
            let counts = proportional_counts(h * w, &ratios);
            if counts.contains(&0) {
                return Err(Error::InvalidConfig("a class ratio leaves a class with no pixels".into()));
            }
            let mut pos = 0;
            for (c, &n) in counts.iter().enumerate() {
                labels[pos..pos + n].fill(c as u16 + 1);
                pos += n;
            }
        }
        Geometry::Blocks => {
            if spec.ratios.windows(2).any(|r| r[0] != r[1]) {
                return Err(Error::InvalidConfig(
                    "class ratios are only supported with stripes".into(),
                ));
            }
            let rows = (k as f64).sqrt().ceil() as usize;
            let cols = k.div_ceil(rows);
            if rows > h || cols > w {
                return Err(Error::InvalidConfig(format!(
                    "{k} blocks need a {rows}x{cols} grid, scene is {h}x{w}"
                )));
            }
            for r in 0..h {
                for c in 0..w {
                    let cell = (r * rows / h) * cols + c * cols / w;
                    if cell < k {
                        labels[r * w + c] = cell as u16 + 1;
                    }
                }
            }
        }
    }
    Ok(labels)
}

/// Generates a cube and its ground truth. Every class gets a smooth mean
/// spectrum from a seeded random walk (background too); pixels add i.i.d.
/// Gaussian noise.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(HyperCube, LabelField)> {
    if spec.height == 0 || spec.width == 0 || spec.bands == 0 || spec.classes == 0 {
        return Err(Error::InvalidConfig("scene dimensions and class count must be positive".into()));
    }
    if spec.classes > u16::MAX as usize {
        return Err(Error::InvalidConfig("too many classes".into()));
    }
    if !spec.ratios.is_empty()
        && (spec.ratios.len() != spec.classes || spec.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())))
    {
        return Err(Error::InvalidConfig(format!(
            "need {} positive class ratios, got {:?}",
            spec.classes, spec.ratios
        )));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) || !spec.mean_scale.is_finite() {
        return Err(Error::InvalidConfig("noise and scale must be finite, noise non-negative".into()));
    }
    let labels = layout(spec)?;

    let mut walk_rng = SeededRng::new(seed).fork(1);
    let means: Vec<Vec<f64>> = (0..=spec.classes)
        .map(|_| {
            let mut v = walk_rng.uniform(0.2, 0.8);
            (0..spec.bands)
                .map(|_| {
                    v += walk_rng.normal(0.0, 0.1);
                    v * spec.mean_scale
                })
                .collect()
        })
        .collect();

    let mut noise_rng = SeededRng::new(seed).fork(2);
    let mut values = Vec::with_capacity(labels.len() * spec.bands);
    for &l in &labels {
        for &m in &means[l as usize] {
            let n = if spec.noise > 0.0 { noise_rng.normal(0.0, spec.noise) } else { 0.0 };
            values.push(m + n);
        }
    }
    Ok((
        HyperCube::new(spec.height, spec.width, spec.bands, values)?,
        LabelField::new(spec.height, spec.width, labels)?,
    ))
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

use super::{LabelField, Pixel};

/// Minimum ground-truth pixels per class for a split to be possible.
pub const MIN_CLASS_PIXELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub labeled_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

/// A pixel with its 0-based class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Labeled {
    pub pixel: Pixel,
    pub class: usize,
}

/// Labeled / validation / test partition of the ground truth, plus the
/// unlabeled pool for co-training.
///
/// The unlabeled pool is every ground-truth pixel outside the labeled set,
/// so it overlaps validation and test coordinates; only coordinates are
/// kept there, never labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub labeled: Vec<Labeled>,
    pub validation: Vec<Labeled>,
    pub test: Vec<Labeled>,
    pub unlabeled: Vec<Pixel>,
    pub num_classes: usize,
}

fn fraction_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).max(1)
}

pub fn split_data(gt: &LabelField, spec: &SplitSpec) -> Result<DataSplit> {
    let (fl, fv) = (spec.labeled_fraction, spec.validation_fraction);
    if !(fl > 0.0 && fl < 1.0 && fv > 0.0 && fv < 1.0 && fl + fv < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "fractions ({fl}, {fv}) must lie in (0, 1) and sum below 1"
        )));
    }
    let mut by_class: BTreeMap<u16, Vec<Pixel>> = BTreeMap::new();
    for (p, l) in gt.labeled_pixels() {
        by_class.entry(l).or_default().push(p);
    }
    if by_class.is_empty() {
        return Err(Error::InvalidInput("ground truth has no labeled pixels".into()));
    }
    let num_classes = gt.num_classes();
    for class in 1..=num_classes as u16 {
        let count = by_class.get(&class).map_or(0, Vec::len);
        if count < MIN_CLASS_PIXELS {
            return Err(Error::InsufficientClass {
                class: class as usize,
                count,
                required: MIN_CLASS_PIXELS,
            });
        }
    }

    let mut rng = SeededRng::new(spec.seed);
    let mut split = DataSplit {
        labeled: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        unlabeled: Vec::new(),
        num_classes,
    };
    for (&class, pixels) in &by_class {
        let mut pixels = pixels.clone();
        rng.shuffle(&mut pixels);
        let n = pixels.len();
        let n_lab = fraction_count(fl, n).min(n - 2);
        let n_val = fraction_count(fv, n).min(n - n_lab - 1);
        let tag = |p: &Pixel| Labeled {
            pixel: *p,
            class: class as usize - 1,
        };
        split.labeled.extend(pixels[..n_lab].iter().map(tag));
        split.validation.extend(pixels[n_lab..n_lab + n_val].iter().map(tag));
        split.test.extend(pixels[n_lab + n_val..].iter().map(tag));
    }
    let labeled: std::collections::BTreeSet<Pixel> =
        split.labeled.iter().map(|l| l.pixel).collect();
    split.unlabeled = gt
        .labeled_pixels()
        .map(|(p, _)| p)
        .filter(|p| !labeled.contains(p))
        .collect();
    Ok(split)
}

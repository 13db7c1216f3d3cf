use crate::error::{Error, Result};

pub const KMEANS_TOLERANCE: f64 = 1e-8;
pub const KMEANS_MAX_SWEEPS: usize = 100;

/// Lloyd clustering whose center `i` was seeded by the class-`i` anchor, so
/// cluster index and class index coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sweeps: usize,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
pub fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Runs Lloyd iterations from `anchors` (one per class). Stops once the
/// summed center displacement drops below `tolerance` or after
/// `max_sweeps`. A center that loses all its points stays where it was.
pub fn seeded_kmeans(
    features: &[Vec<f64>],
    anchors: &[Vec<f64>],
    k: usize,
    max_sweeps: usize,
    tolerance: f64,
) -> Result<KMeansModel> {
    if anchors.len() != k || k == 0 {
        return Err(Error::InvalidInput(format!(
            "need one anchor per class: {k} classes, {} anchors",
            anchors.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::InvalidInput("no features to cluster".into()));
    }
    let dim = anchors[0].len();
    if anchors.iter().chain(features).any(|v| v.len() != dim) {
        return Err(Error::Shape(format!(
            "feature vectors must all have length {dim}"
        )));
    }

    let mut centers = anchors.to_vec();
    let mut assignments: Vec<usize> = features.iter().map(|f| nearest_center(f, &centers)).collect();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (f, &a) in features.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(f) {
                *s += v;
            }
        }
        let mut movement = 0.0;
        for i in 0..k {
            if counts[i] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[i].iter().map(|s| s / counts[i] as f64).collect();
            movement += squared_distance(&next, &centers[i]).sqrt();
            centers[i] = next;
        }
        assignments = features.iter().map(|f| nearest_center(f, &centers)).collect();
        if movement < tolerance {
            break;
        }
    }
    Ok(KMeansModel {
        centers,
        assignments,
        sweeps,
    })
}

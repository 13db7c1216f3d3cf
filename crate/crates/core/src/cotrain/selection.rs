//! Pseudo-label selection rules.
//!
//! Everything here works on learner snapshots (coordinates, probabilities,
//! features). No function in this module can see ground-truth labels.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{argmax, SeededRng};
use crate::preprocess::{Labeled, Pixel};

/// One learner's view of the unlabeled pool: predicted label `L`,
/// class probabilities `P` and feature vector `F` per pixel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearnerSnapshot {
    pub pixels: Vec<Pixel>,
    pub labels: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
    pub features: Vec<Vec<f64>>,
}

impl LearnerSnapshot {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn push(&mut self, pixel: Pixel, probs: Vec<f64>, features: Vec<f64>) {
        self.pixels.push(pixel);
        self.labels.push(argmax(&probs));
        self.probs.push(probs);
        self.features.push(features);
    }
}

/// Which learner an update set is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerRole {
    /// Learner 1, the spectral (RNN) view.
    Spectral,
    /// Learner 2, the spatial (CNN) view.
    Spatial,
}

/// A pool sample both learners label identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementSample {
    /// Position in the snapshots.
    pub index: usize,
    pub pixel: Pixel,
    pub label: usize,
    /// `P1(label) * P2(label)`, used for ranking.
    pub confidence: f64,
}

/// A disagreement sample relabeled by probability difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversitySample {
    pub index: usize,
    pub pixel: Pixel,
    pub label: usize,
    /// `max_i` of the probability difference.
    pub score: f64,
}

fn check_aligned(s1: &LearnerSnapshot, s2: &LearnerSnapshot) -> Result<()> {
    if s1.pixels != s2.pixels || s1.probs.len() != s1.len() || s2.probs.len() != s2.len() {
        return Err(Error::Internal(
            "learner snapshots cover different pixels".into(),
        ));
    }
    Ok(())
}

/// Samples where `L1(x) == L2(x)`, tagged with the agreed label.
pub fn agreement_set(s1: &LearnerSnapshot, s2: &LearnerSnapshot) -> Result<Vec<AgreementSample>> {
    check_aligned(s1, s2)?;
    Ok((0..s1.len())
        .filter(|&i| s1.labels[i] == s2.labels[i])
        .map(|i| {
            let label = s1.labels[i];
            AgreementSample {
                index: i,
                pixel: s1.pixels[i],
                label,
                confidence: s1.probs[i][label] * s2.probs[i][label],
            }
        })
        .collect())
}

/// Relabels the disagreement samples for one learner.
///
/// For the spectral learner the label is `argmax(P2 - P1)`; for the spatial
/// learner `argmax(P1 - P2)`: each learner is taught the class the other one
/// believes in more strongly than it does.
pub fn diversity_labels(
    target: LearnerRole,
    s1: &LearnerSnapshot,
    s2: &LearnerSnapshot,
) -> Result<Vec<DiversitySample>> {
    check_aligned(s1, s2)?;
    Ok((0..s1.len())
        .filter(|&i| s1.labels[i] != s2.labels[i])
        .map(|i| {
            let diff: Vec<f64> = match target {
                LearnerRole::Spectral => s2.probs[i].iter().zip(&s1.probs[i]).map(|(a, b)| a - b).collect(),
                LearnerRole::Spatial => s1.probs[i].iter().zip(&s2.probs[i]).map(|(a, b)| a - b).collect(),
            };
            let label = argmax(&diff);
            DiversitySample {
                index: i,
                pixel: s1.pixels[i],
                label,
                score: diff[label],
            }
        })
        .collect())
}

/// Co-decision: elementwise product of the two probability vectors (left
/// unnormalized) and its argmax.
pub fn codecide(p1: &[f64], p2: &[f64]) -> Result<(usize, Vec<f64>)> {
    if p1.len() != p2.len() {
        return Err(Error::Shape(format!(
            "probability vectors of length {} and {}",
            p1.len(),
            p2.len()
        )));
    }
    let combined: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| a * b).collect();
    Ok((argmax(&combined), combined))
}

/// Result of a per-class selection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    pub updates: Vec<Labeled>,
    /// Number of samples added per class.
    pub per_class: Vec<usize>,
}

/// Balanced selection for one learner.
///
/// For every class `c`, candidates are agreement samples labeled `c` whose
/// k-means cluster is `c`, then diversity samples labeled `c` whose cluster
/// is `c`. Agreement candidates are ranked by confidence and diversity
/// candidates by score (both descending, stable), and the first `n_update`
/// are taken.
pub fn select_updates(
    agreement: &[AgreementSample],
    agreement_clusters: &[usize],
    diversity: &[DiversitySample],
    diversity_clusters: &[usize],
    n_update: usize,
    num_classes: usize,
) -> Result<Selection> {
    if agreement.len() != agreement_clusters.len() || diversity.len() != diversity_clusters.len() {
        return Err(Error::Internal(
            "cluster assignments do not match candidate sets".into(),
        ));
    }
    let mut selection = Selection {
        updates: Vec::new(),
        per_class: vec![0; num_classes],
    };
    for class in 0..num_classes {
        let mut agree: Vec<&AgreementSample> = agreement
            .iter()
            .zip(agreement_clusters)
            .filter(|(s, &c)| s.label == class && c == class)
            .map(|(s, _)| s)
            .collect();
        agree.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        let mut diverse: Vec<&DiversitySample> = diversity
            .iter()
            .zip(diversity_clusters)
            .filter(|(s, &c)| s.label == class && c == class)
            .map(|(s, _)| s)
            .collect();
        diverse.sort_by(|a, b| b.score.total_cmp(&a.score));

        let picked: Vec<Pixel> = agree
            .iter()
            .map(|s| s.pixel)
            .chain(diverse.iter().map(|s| s.pixel))
            .take(n_update)
            .collect();
        if picked.len() < n_update {
            warn!(
                "class {}: only {} of {n_update} qualifying candidates",
                class + 1,
                picked.len()
            );
        }
        selection.per_class[class] = picked.len();
        selection
            .updates
            .extend(picked.into_iter().map(|pixel| Labeled { pixel, class }));
    }
    Ok(selection)
}

/// Random sub-pool of at most `pool_size` pixels, in pool order.
pub fn draw_pool(pool: &[Pixel], pool_size: usize, rng: &mut SeededRng) -> Vec<Pixel> {
    if pool_size >= pool.len() {
        return pool.to_vec();
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    rng.shuffle(&mut idx);
    let mut chosen: Vec<usize> = idx[..pool_size].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| pool[i]).collect()
}

/// Classic DCPE update on an already-drawn sub-pool: agreement samples by
/// confidence, then the highest-scoring diversity samples, up to `count`
/// per learner. No per-class quota and no clustering gate.
pub fn dcpe_update(
    s1: &LearnerSnapshot,
    s2: &LearnerSnapshot,
    count: usize,
    num_classes: usize,
) -> Result<(Selection, Selection)> {
    let mut agreement = agreement_set(s1, s2)?;
    agreement.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let pick = |role: LearnerRole| -> Result<Selection> {
        let mut diverse = diversity_labels(role, s1, s2)?;
        diverse.sort_by(|a, b| b.score.total_cmp(&a.score));
        let updates: Vec<Labeled> = agreement
            .iter()
            .map(|s| Labeled {
                pixel: s.pixel,
                class: s.label,
            })
            .chain(diverse.iter().map(|s| Labeled {
                pixel: s.pixel,
                class: s.label,
            }))
            .take(count)
            .collect();
        Ok(Selection {
            per_class: class_histogram(&updates, num_classes),
            updates,
        })
    };
    Ok((pick(LearnerRole::Spectral)?, pick(LearnerRole::Spatial)?))
}

pub fn class_histogram(updates: &[Labeled], num_classes: usize) -> Vec<usize> {
    let mut h = vec![0; num_classes];
    for u in updates {
        h[u.class] += 1;
    }
    h
}

/// Population standard deviation of per-class counts.
pub fn histogram_std(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    (counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n).sqrt()
}

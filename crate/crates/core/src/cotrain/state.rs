use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::preprocess::{Labeled, Pixel};

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub s1: usize,
    pub s2: usize,
    pub du: usize,
    pub added1: Vec<usize>,
    pub added2: Vec<usize>,
    pub val_oa: f64,
}

fn join(counts: &[usize]) -> String {
    counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iteration={} s1={} s2={} du={} added1={} added2={} val_oa={:.6}",
            self.iteration,
            self.s1,
            self.s2,
            self.du,
            join(&self.added1),
            join(&self.added2),
            self.val_oa
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoTrainState {
    /// Training set of the spectral learner, pseudo-labels appended.
    pub s1: Vec<Labeled>,
    /// Training set of the spatial learner.
    pub s2: Vec<Labeled>,
    pub du: BTreeSet<Pixel>,
    /// Validation OA of the co-decision, index = iteration.
    pub history: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub best_iteration: usize,
}

impl CoTrainState {
    pub fn new(labeled: &[Labeled], unlabeled: &[Pixel]) -> Self {
        CoTrainState {
            s1: labeled.to_vec(),
            s2: labeled.to_vec(),
            du: unlabeled.iter().copied().collect(),
            ..Default::default()
        }
    }

    /// Moves `d1` into S1 and `d2` into S2 and removes both from Du. A pixel
    /// in both sets keeps its own label in each.
    pub fn apply_updates(&mut self, d1: &[Labeled], d2: &[Labeled]) -> Result<()> {
        for u in d1.iter().chain(d2) {
            if !self.du.contains(&u.pixel) {
                return Err(Error::Internal(format!(
                    "selected pixel ({}, {}) is not in the unlabeled pool",
                    u.pixel.row, u.pixel.col
                )));
            }
        }
        self.s1.extend_from_slice(d1);
        self.s2.extend_from_slice(d2);
        for u in d1.iter().chain(d2) {
            self.du.remove(&u.pixel);
        }
        Ok(())
    }

    /// True when neither training set shares a pixel with Du.
    pub fn is_disjoint(&self) -> bool {
        self.s1.iter().chain(&self.s2).all(|s| !self.du.contains(&s.pixel))
    }

    /// Highest validation OA, earliest on ties.
    pub fn argmax_history(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.history.iter().enumerate() {
            if v > self.history[best] {
                best = i;
            }
        }
        best
    }
}

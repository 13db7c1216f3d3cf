use std::fmt;
use std::str::FromStr;

use log::{info, warn};

use super::kmeans::{seeded_kmeans, KMEANS_MAX_SWEEPS, KMEANS_TOLERANCE};
use super::learners::ViewLearner;
use super::selection::{
    agreement_set, codecide, dcpe_update, diversity_labels, draw_pool, select_updates,
    LearnerRole, LearnerSnapshot, Selection,
};
use super::state::{CoTrainState, IterationRecord};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::preprocess::{Labeled, Pixel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoTrainMode {
    Mdcpe,
    Dcpe,
    /// Pre-training only.
    Supervised,
}

impl fmt::Display for CoTrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoTrainMode::Mdcpe => "mdcpe",
            CoTrainMode::Dcpe => "dcpe",
            CoTrainMode::Supervised => "supervised",
        })
    }
}

impl FromStr for CoTrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mdcpe" => Ok(CoTrainMode::Mdcpe),
            "dcpe" => Ok(CoTrainMode::Dcpe),
            "supervised" => Ok(CoTrainMode::Supervised),
            other => Err(Error::InvalidConfig(format!(
                "unknown co-training mode `{other}` (expected mdcpe, dcpe or supervised)"
            ))),
        }
    }
}

/// Loop settings. Epochs and learning rates belong to each learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoTrainConfig {
    /// Samples added per class per learner per iteration.
    pub n_update: usize,
    pub max_iterations: usize,
    pub mode: CoTrainMode,
    /// Sub-pool size for DCPE.
    pub dcpe_pool: usize,
    pub kmeans_sweeps: usize,
    pub kmeans_tolerance: f64,
}

impl Default for CoTrainConfig {
    fn default() -> Self {
        CoTrainConfig {
            n_update: 5,
            max_iterations: 5,
            mode: CoTrainMode::Mdcpe,
            dcpe_pool: 200,
            kmeans_sweeps: KMEANS_MAX_SWEEPS,
            kmeans_tolerance: KMEANS_TOLERANCE,
        }
    }
}

impl CoTrainConfig {
    fn iterations(&self) -> usize {
        match self.mode {
            CoTrainMode::Supervised => 0,
            _ => self.max_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations() > 0 && self.n_update == 0 {
            return Err(Error::InvalidConfig(
                "n_update must be positive when co-training".into(),
            ));
        }
        if self.mode == CoTrainMode::Dcpe && self.iterations() > 0 && self.dcpe_pool == 0 {
            return Err(Error::InvalidConfig("dcpe_pool must be positive".into()));
        }
        if self.kmeans_sweeps == 0 || !(self.kmeans_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("invalid k-means stopping rule".into()));
        }
        Ok(())
    }
}

/// Final state plus both learners as they were at the best iteration.
#[derive(Debug, Clone)]
pub struct CoTrainOutcome<A, B> {
    pub state: CoTrainState,
    pub learner1: A,
    pub learner2: B,
}

/// Both learners' predictions over `pixels`.
pub fn snapshot_unlabeled<A: ViewLearner, B: ViewLearner>(
    learner1: &A,
    learner2: &B,
    pixels: &[Pixel],
) -> Result<(LearnerSnapshot, LearnerSnapshot)> {
    let mut s1 = LearnerSnapshot::default();
    let mut s2 = LearnerSnapshot::default();
    for &p in pixels {
        let (probs, features) = learner1.infer(p)?;
        s1.push(p, probs, features);
        let (probs, features) = learner2.infer(p)?;
        s2.push(p, probs, features);
    }
    Ok((s1, s2))
}

/// Co-decision accuracy over a labeled set.
pub fn codecision_accuracy<A: ViewLearner, B: ViewLearner>(
    learner1: &A,
    learner2: &B,
    samples: &[Labeled],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut hits = 0;
    for s in samples {
        let (label, _) = codecide(&learner1.probabilities(s.pixel)?, &learner2.probabilities(s.pixel)?)?;
        if label == s.class {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// One anchor pixel per class from the original labeled set.
fn draw_anchors(labeled: &[Labeled], k: usize, rng: &mut SeededRng) -> Result<Vec<Pixel>> {
    (0..k)
        .map(|c| {
            let members: Vec<Pixel> = labeled.iter().filter(|s| s.class == c).map(|s| s.pixel).collect();
            if members.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no labeled sample of class {} to anchor k-means",
                    c + 1
                )));
            }
            Ok(members[rng.below(members.len())])
        })
        .collect()
}

fn mdcpe_select<L: ViewLearner>(
    role: LearnerRole,
    learner: &L,
    anchors: &[Pixel],
    s1: &LearnerSnapshot,
    s2: &LearnerSnapshot,
    config: &CoTrainConfig,
) -> Result<Selection> {
    let k = learner.num_classes();
    let agreement = agreement_set(s1, s2)?;
    let diversity = diversity_labels(role, s1, s2)?;
    let own = match role {
        LearnerRole::Spectral => s1,
        LearnerRole::Spatial => s2,
    };
    let anchor_features = anchors
        .iter()
        .map(|&p| Ok(learner.infer(p)?.1))
        .collect::<Result<Vec<_>>>()?;
    // agreement and disagreement sets partition the snapshot, so one
    // clustering over the whole snapshot covers both
    let km = seeded_kmeans(
        &own.features,
        &anchor_features,
        k,
        config.kmeans_sweeps,
        config.kmeans_tolerance,
    )?;
    let agreement_clusters: Vec<usize> = agreement.iter().map(|s| km.assignments[s.index]).collect();
    let diversity_clusters: Vec<usize> = diversity.iter().map(|s| km.assignments[s.index]).collect();
    select_updates(
        &agreement,
        &agreement_clusters,
        &diversity,
        &diversity_clusters,
        config.n_update,
        k,
    )
}

/// Runs co-training. Iteration 0 trains both learners on `labeled` alone;
/// every later iteration snapshots the pool, selects, updates and retrains.
/// Returns the learners from the iteration with the best validation OA of
/// the co-decision (earliest on ties).
pub fn cotrain_loop<A: ViewLearner, B: ViewLearner>(
    mut learner1: A,
    mut learner2: B,
    labeled: &[Labeled],
    unlabeled: &[Pixel],
    validation: &[Labeled],
    config: &CoTrainConfig,
    rng: &SeededRng,
) -> Result<CoTrainOutcome<A, B>> {
    config.validate()?;
    let k = learner1.num_classes();
    if learner2.num_classes() != k {
        return Err(Error::InvalidConfig(format!(
            "learners disagree on class count: {k} vs {}",
            learner2.num_classes()
        )));
    }
    if labeled.is_empty() {
        return Err(Error::InvalidInput("labeled set is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::InvalidInput("validation set is empty".into()));
    }
    if config.iterations() > 0 && config.n_update * k >= unlabeled.len() {
        warn!(
            "n_update x classes = {} is not far below the pool size {}",
            config.n_update * k,
            unlabeled.len()
        );
    }

    let mut train1 = rng.fork(1);
    let mut train2 = rng.fork(2);
    let mut select = rng.fork(3);

    let mut state = CoTrainState::new(labeled, unlabeled);
    learner1.fit(&state.s1, &mut train1)?;
    learner2.fit(&state.s2, &mut train2)?;
    let oa = codecision_accuracy(&learner1, &learner2, validation)?;
    state.history.push(oa);
    state.records.push(IterationRecord {
        iteration: 0,
        s1: state.s1.len(),
        s2: state.s2.len(),
        du: state.du.len(),
        added1: vec![0; k],
        added2: vec![0; k],
        val_oa: oa,
    });
    info!("{}", state.records[0]);
    let mut best = (learner1.clone(), learner2.clone());

    for iteration in 1..=config.iterations() {
        if state.du.is_empty() {
            info!("unlabeled pool exhausted after {} iterations", iteration - 1);
            break;
        }
        let pool: Vec<Pixel> = state.du.iter().copied().collect();
        let (d1, d2) = match config.mode {
            CoTrainMode::Mdcpe => {
                let (s1, s2) = snapshot_unlabeled(&learner1, &learner2, &pool)?;
                let anchors = draw_anchors(labeled, k, &mut select)?;
                (
                    mdcpe_select(LearnerRole::Spectral, &learner1, &anchors, &s1, &s2, config)?,
                    mdcpe_select(LearnerRole::Spatial, &learner2, &anchors, &s1, &s2, config)?,
                )
            }
            CoTrainMode::Dcpe => {
                let sub = draw_pool(&pool, config.dcpe_pool, &mut select);
                let (s1, s2) = snapshot_unlabeled(&learner1, &learner2, &sub)?;
                dcpe_update(&s1, &s2, config.n_update * k, k)?
            }
            CoTrainMode::Supervised => unreachable!("supervised mode runs no iterations"),
        };

        let before = state.du.len();
        state.apply_updates(&d1.updates, &d2.updates)?;
        let selected = !d1.updates.is_empty() || !d2.updates.is_empty();
        if !state.is_disjoint() || state.du.len() > before || (selected && state.du.len() >= before) {
            return Err(Error::Internal(format!(
                "pool bookkeeping broken at iteration {iteration}"
            )));
        }
        if !selected {
            info!("no samples selected at iteration {iteration}; stopping");
            break;
        }

        learner1.fit(&state.s1, &mut train1)?;
        learner2.fit(&state.s2, &mut train2)?;
        let oa = codecision_accuracy(&learner1, &learner2, validation)?;
        state.history.push(oa);
        let record = IterationRecord {
            iteration,
            s1: state.s1.len(),
            s2: state.s2.len(),
            du: state.du.len(),
            added1: d1.per_class,
            added2: d2.per_class,
            val_oa: oa,
        };
        info!("{record}");
        state.records.push(record);
        if oa > state.history[state.best_iteration] {
            state.best_iteration = iteration;
            best = (learner1.clone(), learner2.clone());
        }
    }
    if state.best_iteration != state.argmax_history() {
        return Err(Error::Internal("best iteration does not match history".into()));
    }
    Ok(CoTrainOutcome {
        state,
        learner1: best.0,
        learner2: best.1,
    })
}

//! Co-training engine: DCPE / MDCPE selection, k-means balancing and the
//! iteration loop.

mod engine;
mod kmeans;
mod learners;
mod selection;
mod state;

pub use engine::{
    codecision_accuracy, cotrain_loop, snapshot_unlabeled, CoTrainConfig, CoTrainMode,
    CoTrainOutcome,
};
pub use kmeans::{nearest_center, seeded_kmeans, KMeansModel, KMEANS_MAX_SWEEPS, KMEANS_TOLERANCE};
pub use learners::{SpatialLearner, SpectralLearner, ViewLearner};
pub use selection::{
    agreement_set, class_histogram, codecide, dcpe_update, diversity_labels, draw_pool,
    histogram_std, select_updates, AgreementSample, DiversitySample, LearnerRole,
    LearnerSnapshot, Selection,
};
pub use state::{CoTrainState, IterationRecord};

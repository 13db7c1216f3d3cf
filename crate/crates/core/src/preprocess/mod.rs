//! Normalization, PCA, patch/sequence extraction and data splitting.

mod cube;
mod normalize;
mod patch;
mod pca;
mod split;

pub use cube::{HyperCube, LabelField, Pixel};
pub use normalize::minmax_normalize;
pub use patch::{extract_patch, reflect_index, spectral_sequence};
pub use pca::{
    pca_fit, pca_transform, symmetric_eigen, ComponentSelection, PcaModel, JACOBI_MAX_SWEEPS,
    JACOBI_TOLERANCE,
};
pub use split::{split_data, DataSplit, Labeled, SplitSpec, MIN_CLASS_PIXELS};

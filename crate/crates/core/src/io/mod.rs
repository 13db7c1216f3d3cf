//! File formats, configuration, synthetic scenes, checkpoints and the
//! experiment runner.

mod checkpoint;
mod config;
mod experiment;
mod format;
mod synthetic;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, model_checkpoint, restore_models,
    save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
};
pub use config::{ExperimentConfig, CONFIG_KEYS, OUTPUT_DIR_ENV};
pub use experiment::{
    build_pipeline, run_experiment, run_on_data, Pipeline, RunReport, CHECKPOINT_FILE,
    CONFIG_ECHO_FILE, LOG_FILE, MAP_FILE, METRICS_FILE,
};
pub use format::{
    decode_cube, decode_labels, encode_cube, encode_labels, load_cube, load_labels, save_cube,
    save_labels, CUBE_HEADER_LEN, CUBE_MAGIC, FORMAT_VERSION, LABEL_HEADER_LEN, LABEL_MAGIC,
};
pub use synthetic::{generate_synthetic, proportional_counts, Geometry, SyntheticSpec};

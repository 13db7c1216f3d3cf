//! End-to-end experiment runner.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use log::info;

use super::checkpoint::{model_checkpoint, save_checkpoint};
use super::config::ExperimentConfig;
use super::format::{load_cube, load_labels, write_file};
use crate::cnn::{CnnConfig, CnnModel};
use crate::cotrain::{codecide, cotrain_loop, CoTrainConfig, CoTrainState, SpatialLearner, SpectralLearner, ViewLearner};
use crate::error::{Error, Result};
use crate::metrics::{confusion, default_palette, render_map, scores, Scores};
use crate::numerics::SeededRng;
use crate::preprocess::{
    minmax_normalize, pca_fit, pca_transform, split_data, HyperCube, LabelField, SplitSpec,
};
use crate::rnn::{RnnConfig, RnnModel};
use crate::training::SgdConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const LOG_FILE: &str = "iterations.log";
pub const MAP_FILE: &str = "map.ppm";
pub const CHECKPOINT_FILE: &str = "best.hsck";
pub const CONFIG_ECHO_FILE: &str = "config.txt";

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scores: Scores,
    pub state: CoTrainState,
    pub pca_components: usize,
    pub output_dir: PathBuf,
}

/// Both learners and everything they were built from.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub spectral: SpectralLearner,
    pub spatial: SpatialLearner,
    pub pca_components: usize,
}

/// Normalizes, reduces and builds freshly initialized learners.
pub fn build_pipeline(cube: &HyperCube, config: &ExperimentConfig, classes: usize) -> Result<Pipeline> {
    let normalized = minmax_normalize(cube);
    let pca = pca_fit(&normalized, config.pca)?;
    let reduced = pca_transform(&normalized, &pca)?;
    info!(
        "PCA keeps {} of {} bands ({:.4} of variance)",
        pca.num_components(),
        pca.bands(),
        pca.explained_ratio()
    );
    let rng = SeededRng::new(config.seed);
    let rnn = RnnModel::new(
        RnnConfig {
            bands: cube.bands(),
            group: config.rnn_group,
            hidden: config.rnn_hidden,
            fc1: config.rnn_fc1,
            classes,
        },
        &mut rng.fork(10),
    )?;
    let mut cnn_config = CnnConfig::standard(config.patch_size, pca.num_components(), classes, config.cnn_dropout);
    cnn_config.fc1 = config.cnn_fc1;
    let cnn = CnnModel::new(cnn_config, &mut rng.fork(11))?;
    Ok(Pipeline {
        spectral: SpectralLearner {
            model: rnn,
            cube: Arc::new(normalized),
            sgd: SgdConfig {
                epochs: config.rnn_epochs,
                learning_rate: config.rnn_lr,
                batch_size: config.batch_size,
            },
        },
        spatial: SpatialLearner {
            model: cnn,
            cube: Arc::new(reduced),
            sgd: SgdConfig {
                epochs: config.cnn_epochs,
                learning_rate: config.cnn_lr,
                batch_size: config.batch_size,
            },
        },
        pca_components: pca.num_components(),
    })
}

fn iteration_log(state: &CoTrainState) -> String {
    let mut out = String::new();
    for r in &state.records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out.push_str(&format!("best_iteration={}\n", state.best_iteration));
    out
}

/// Runs the pipeline on in-memory data and writes all artifacts.
pub fn run_on_data(cube: &HyperCube, gt: &LabelField, config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if !gt.matches(cube) {
        return Err(Error::Shape(format!(
            "labels are {}x{} but the cube is {}x{}",
            gt.height(),
            gt.width(),
            cube.height(),
            cube.width()
        )));
    }
    let split = split_data(
        gt,
        &SplitSpec {
            labeled_fraction: config.labeled_fraction,
            validation_fraction: config.validation_fraction,
            seed: config.seed,
        },
    )?;
    info!(
        "split: {} labeled, {} validation, {} test, {} unlabeled",
        split.labeled.len(),
        split.validation.len(),
        split.test.len(),
        split.unlabeled.len()
    );
    let pipeline = build_pipeline(cube, config, split.num_classes)?;
    let cotrain = CoTrainConfig {
        n_update: config.n_update,
        max_iterations: config.max_iterations,
        mode: config.mode,
        dcpe_pool: config.dcpe_pool,
        ..Default::default()
    };
    let outcome = cotrain_loop(
        pipeline.spectral,
        pipeline.spatial,
        &split.labeled,
        &split.unlabeled,
        &split.validation,
        &cotrain,
        &SeededRng::new(config.seed).fork(20),
    )?;

    let mut truth = Vec::with_capacity(split.test.len());
    let mut predicted = Vec::with_capacity(split.test.len());
    for s in &split.test {
        let (label, _) = codecide(
            &outcome.learner1.probabilities(s.pixel)?,
            &outcome.learner2.probabilities(s.pixel)?,
        )?;
        truth.push(s.class as u16 + 1);
        predicted.push(label as u16 + 1);
    }
    let cm = confusion(&truth, &predicted, split.num_classes)?;
    let scores = scores(&cm)?;

    let mut map = LabelField::background(gt.height(), gt.width())?;
    for (p, _) in gt.labeled_pixels() {
        let (label, _) = codecide(
            &outcome.learner1.probabilities(p)?,
            &outcome.learner2.probabilities(p)?,
        )?;
        map.set(p, label as u16 + 1);
    }

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(METRICS_FILE), scores.to_csv().as_bytes())?;
    write_file(&dir.join(LOG_FILE), iteration_log(&outcome.state).as_bytes())?;
    write_file(&dir.join(CONFIG_ECHO_FILE), config.to_text().as_bytes())?;
    let mut palette = default_palette(split.num_classes);
    palette.truncate(split.num_classes.max(map.num_classes()) + 1);
    write_file(&dir.join(MAP_FILE), &render_map(&map, &palette)?)?;
    save_checkpoint(
        &model_checkpoint(&outcome.learner1.model, &outcome.learner2.model, Some(&outcome.state)),
        dir.join(CHECKPOINT_FILE),
    )?;
    info!("test OA {:.6}, AA {:.6}, kappa {:.6}", scores.oa, scores.aa, scores.kappa);

    Ok(RunReport {
        scores,
        state: outcome.state,
        pca_components: pipeline.pca_components,
        output_dir: dir.clone(),
    })
}

/// Loads the configured files and runs the pipeline.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let cube = load_cube(&config.cube_path)?;
    let gt = load_labels(&config.labels_path)?;
    run_on_data(&cube, &gt, config)
}

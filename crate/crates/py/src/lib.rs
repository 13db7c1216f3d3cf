//! Python bindings. Class indices are 0-based, as in the Rust API; label
//! maps use 0 for background and 1..=k for classes.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mdcpe::cnn::{CnnConfig, CnnModel};
use mdcpe::cotrain;
use mdcpe::io::{self, ExperimentConfig, SyntheticSpec};
use mdcpe::metrics::{self, ConfusionMatrix};
use mdcpe::numerics::SeededRng;
use mdcpe::preprocess::{self, ComponentSelection, HyperCube, LabelField};
use mdcpe::rnn::{RnnConfig, RnnModel};
use mdcpe::Error;

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for mdcpe::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// A hyperspectral cube with its ground-truth labels.
#[pyclass(name = "Scene", module = "pymdcpe")]
pub struct PyScene {
    cube: HyperCube,
    labels: LabelField,
}

#[pymethods]
impl PyScene {
    /// Generates a synthetic scene.
    #[staticmethod]
    #[pyo3(signature = (height=32, width=32, bands=16, classes=4, geometry="blocks", noise=0.05, scale=1.0, ratios=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        height: usize,
        width: usize,
        bands: usize,
        classes: usize,
        geometry: &str,
        noise: f64,
        scale: f64,
        ratios: Option<Vec<f64>>,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = SyntheticSpec {
            height,
            width,
            bands,
            classes,
            geometry: geometry.parse().or_py()?,
            mean_scale: scale,
            noise,
            ratios: ratios.unwrap_or_default(),
        };
        let (cube, labels) = io::generate_synthetic(&spec, seed).or_py()?;
        Ok(PyScene { cube, labels })
    }

    #[staticmethod]
    fn load(cube_path: &str, labels_path: &str) -> PyResult<Self> {
        Ok(PyScene {
            cube: io::load_cube(cube_path).or_py()?,
            labels: io::load_labels(labels_path).or_py()?,
        })
    }

    fn save(&self, cube_path: &str, labels_path: &str) -> PyResult<()> {
        io::save_cube(&self.cube, cube_path).or_py()?;
        io::save_labels(&self.labels, labels_path).or_py()
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.cube.height(), self.cube.width(), self.cube.bands())
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    fn spectrum(&self, row: usize, col: usize) -> PyResult<Vec<f64>> {
        let p = preprocess::Pixel::new(row, col);
        if !self.cube.contains(p) {
            return Err(PyValueError::new_err("pixel outside the scene"));
        }
        Ok(self.cube.spectrum(p).to_vec())
    }

    /// Row-major labels.
    fn labels(&self) -> Vec<u16> {
        self.labels.labels().to_vec()
    }

    /// Row-major, band-fastest values.
    fn values(&self) -> Vec<f64> {
        self.cube.values().to_vec()
    }

    /// Explained-variance ratios per kept component of the normalized cube.
    #[pyo3(signature = (variance_target=0.99))]
    fn pca_ratios(&self, variance_target: f64) -> PyResult<Vec<f64>> {
        let norm = preprocess::minmax_normalize(&self.cube);
        let model = preprocess::pca_fit(&norm, ComponentSelection::VarianceTarget(variance_target)).or_py()?;
        let total: f64 = model.total_variance();
        Ok(model.explained_variance().iter().map(|v| v / total).collect())
    }

    /// Binary PPM of the ground truth.
    fn render(&self) -> PyResult<Vec<u8>> {
        metrics::render_map(&self.labels, &metrics::default_palette(self.labels.num_classes())).or_py()
    }
}

/// The spectral learner.
#[pyclass(name = "RnnModel", module = "pymdcpe")]
pub struct PyRnnModel {
    model: RnnModel,
}

#[pymethods]
impl PyRnnModel {
    #[new]
    #[pyo3(signature = (bands, classes, group=4, hidden=128, fc1=128, seed=0))]
    fn new(bands: usize, classes: usize, group: usize, hidden: usize, fc1: usize, seed: u64) -> PyResult<Self> {
        let config = RnnConfig { bands, group, hidden, fc1, classes };
        Ok(PyRnnModel {
            model: RnnModel::new(config, &mut SeededRng::new(seed)).or_py()?,
        })
    }

    fn predict(&self, spectrum: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.predict(&spectrum).or_py()
    }

    fn features(&self, spectrum: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.features(&spectrum).or_py()
    }

    /// Mini-batch SGD on `(spectrum, class)` pairs; returns per-epoch loss.
    #[pyo3(signature = (samples, epochs, lr, batch_size=32, seed=0))]
    fn fit(&mut self, samples: Vec<(Vec<f64>, usize)>, epochs: usize, lr: f64, batch_size: usize, seed: u64) -> PyResult<Vec<f64>> {
        let data: Vec<(&[f64], usize)> = samples.iter().map(|(x, c)| (x.as_slice(), *c)).collect();
        let cfg = mdcpe::training::SgdConfig { epochs, learning_rate: lr, batch_size };
        mdcpe::training::train_sgd(&mut self.model, &data, &cfg, &mut SeededRng::new(seed)).or_py()
    }
}

/// The spatial learner with the standard layer sizes.
#[pyclass(name = "CnnModel", module = "pymdcpe")]
pub struct PyCnnModel {
    model: CnnModel,
}

#[pymethods]
impl PyCnnModel {
    #[new]
    #[pyo3(signature = (patch, channels, classes, dropout=0.3, fc1=1024, seed=0))]
    fn new(patch: usize, channels: usize, classes: usize, dropout: f64, fc1: usize, seed: u64) -> PyResult<Self> {
        let mut config = CnnConfig::standard(patch, channels, classes, dropout);
        config.fc1 = fc1;
        Ok(PyCnnModel {
            model: CnnModel::new(config, &mut SeededRng::new(seed)).or_py()?,
        })
    }

    /// `patch` is `[row][col][channel]` flattened.
    fn predict(&self, patch: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.predict(&patch).or_py()
    }

    fn features(&self, patch: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.features(&patch).or_py()
    }
}

/// Experiment configuration in `key = value` form.
#[pyclass(name = "ExperimentConfig", module = "pymdcpe")]
pub struct PyExperimentConfig {
    config: ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    #[new]
    #[pyo3(signature = (text=""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyExperimentConfig { config: ExperimentConfig::parse(text).or_py()? })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.config.apply_overrides([(key, value)]).or_py()
    }

    fn get(&self, key: &str) -> Option<String> {
        self.config.get(key)
    }

    fn to_text(&self) -> String {
        self.config.to_text()
    }

    /// Runs the experiment on the scene and returns test scores.
    fn run(&self, scene: &PyScene) -> PyResult<(f64, f64, f64, usize)> {
        let report = io::run_on_data(&scene.cube, &scene.labels, &self.config).or_py()?;
        Ok((report.scores.oa, report.scores.aa, report.scores.kappa, report.state.best_iteration))
    }
}

/// Co-decision: `(argmax, elementwise product)`.
#[pyfunction]
fn codecide(p1: Vec<f64>, p2: Vec<f64>) -> PyResult<(usize, Vec<f64>)> {
    cotrain::codecide(&p1, &p2).or_py()
}

/// `(oa, aa, kappa)` for 1-based label sequences.
#[pyfunction]
fn scores(truth: Vec<u16>, predicted: Vec<u16>, k: usize) -> PyResult<(f64, f64, f64)> {
    let cm = metrics::confusion(&truth, &predicted, k).or_py()?;
    let s = metrics::scores(&cm).or_py()?;
    Ok((s.oa, s.aa, s.kappa))
}

/// `(oa, aa, kappa)` for a row-major `k x k` count matrix.
#[pyfunction]
fn matrix_scores(counts: Vec<u64>, k: usize) -> PyResult<(f64, f64, f64)> {
    let cm = ConfusionMatrix::from_counts(k, counts).or_py()?;
    let s = metrics::scores(&cm).or_py()?;
    Ok((s.oa, s.aa, s.kappa))
}

/// Seeded Lloyd clustering; returns `(centers, assignments)`.
#[pyfunction]
#[pyo3(signature = (features, anchors, max_sweeps=100, tolerance=1e-8))]
fn seeded_kmeans(
    features: Vec<Vec<f64>>,
    anchors: Vec<Vec<f64>>,
    max_sweeps: usize,
    tolerance: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let k = anchors.len();
    let m = cotrain::seeded_kmeans(&features, &anchors, k, max_sweeps, tolerance).or_py()?;
    Ok((m.centers, m.assignments))
}

#[pymodule]
fn pymdcpe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyRnnModel>()?;
    m.add_class::<PyCnnModel>()?;
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(codecide, m)?)?;
    m.add_function(wrap_pyfunction!(scores, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_scores, m)?)?;
    m.add_function(wrap_pyfunction!(seeded_kmeans, m)?)?;
    Ok(())
}

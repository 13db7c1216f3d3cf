//! `key = value` experiment configuration.

use std::env;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cotrain::CoTrainMode;
use crate::error::{Error, FormatError, Result};
use crate::preprocess::ComponentSelection;

/// Default output directory when neither the config nor the CLI sets one.
pub const OUTPUT_DIR_ENV: &str = "MDCPE_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cube_path: PathBuf,
    pub labels_path: PathBuf,
    pub seed: u64,
    pub labeled_fraction: f64,
    pub validation_fraction: f64,
    pub pca: ComponentSelection,
    pub patch_size: usize,
    pub rnn_hidden: usize,
    pub rnn_group: usize,
    pub rnn_fc1: usize,
    pub rnn_lr: f64,
    pub rnn_epochs: usize,
    pub cnn_lr: f64,
    pub cnn_epochs: usize,
    pub cnn_dropout: f64,
    pub cnn_fc1: usize,
    pub n_update: usize,
    pub max_iterations: usize,
    pub mode: CoTrainMode,
    pub dcpe_pool: usize,
    pub batch_size: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cube_path: PathBuf::from("cube.hsic"),
            labels_path: PathBuf::from("labels.hsil"),
            seed: 0,
            labeled_fraction: 0.05,
            validation_fraction: 0.05,
            pca: ComponentSelection::VarianceTarget(0.99),
            patch_size: 15,
            rnn_hidden: 128,
            rnn_group: 4,
            rnn_fc1: 128,
            rnn_lr: 0.001,
            rnn_epochs: 100,
            cnn_lr: 0.0003,
            cnn_epochs: 100,
            cnn_dropout: 0.3,
            cnn_fc1: 1024,
            n_update: 5,
            max_iterations: 5,
            mode: CoTrainMode::Mdcpe,
            dcpe_pool: 200,
            batch_size: 32,
            output_dir: env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("mdcpe-out")),
        }
    }
}

/// Every accepted key, in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "cube_path",
    "labels_path",
    "seed",
    "labeled_fraction",
    "validation_fraction",
    "pca_variance_target",
    "pca_components",
    "patch_size",
    "rnn.hidden",
    "rnn.group",
    "rnn.fc1",
    "rnn.lr",
    "rnn.epochs",
    "cnn.lr",
    "cnn.epochs",
    "cnn.dropout",
    "cnn.fc1",
    "cotrain.n_update",
    "cotrain.max_iterations",
    "cotrain.mode",
    "cotrain.dcpe_pool",
    "batch_size",
    "output_dir",
];

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` for {key}"))
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut pca_key: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| FormatError::BadConfigLine { line: i + 1, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.starts_with("pca_") {
                if let Some(prev) = pca_key.filter(|&p| p != key) {
                    return Err(bad(format!("{key} conflicts with {prev}")).into());
                }
                pca_key = Some(if key == "pca_components" { "pca_components" } else { "pca_variance_target" });
            }
            config.set(key, value).map_err(bad)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key. Unknown keys and unparsable values are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "cube_path" => self.cube_path = PathBuf::from(value),
            "labels_path" => self.labels_path = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "labeled_fraction" => self.labeled_fraction = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "pca_variance_target" => self.pca = ComponentSelection::VarianceTarget(parse(key, value)?),
            "pca_components" => self.pca = ComponentSelection::Count(parse(key, value)?),
            "patch_size" => self.patch_size = parse(key, value)?,
            "rnn.hidden" => self.rnn_hidden = parse(key, value)?,
            "rnn.group" => self.rnn_group = parse(key, value)?,
            "rnn.fc1" => self.rnn_fc1 = parse(key, value)?,
            "rnn.lr" => self.rnn_lr = parse(key, value)?,
            "rnn.epochs" => self.rnn_epochs = parse(key, value)?,
            "cnn.lr" => self.cnn_lr = parse(key, value)?,
            "cnn.epochs" => self.cnn_epochs = parse(key, value)?,
            "cnn.dropout" => self.cnn_dropout = parse(key, value)?,
            "cnn.fc1" => self.cnn_fc1 = parse(key, value)?,
            "cotrain.n_update" => self.n_update = parse(key, value)?,
            "cotrain.max_iterations" => self.max_iterations = parse(key, value)?,
            "cotrain.mode" => self.mode = value.parse().map_err(|e: Error| e.to_string())?,
            "cotrain.dcpe_pool" => self.dcpe_pool = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Applies `--key value` style overrides after the file was read.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (key, value) in pairs {
            self.set(key, value)
                .map_err(|reason| Error::InvalidConfig(format!("--{key}: {reason}")))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, f) in [
            ("labeled_fraction", self.labeled_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {f}"));
            }
        }
        if self.labeled_fraction + self.validation_fraction >= 1.0 {
            return fail("labeled_fraction + validation_fraction must stay below 1".into());
        }
        match self.pca {
            ComponentSelection::VarianceTarget(t) if !(t > 0.0 && t <= 1.0) => {
                return fail(format!("pca_variance_target must lie in (0, 1], got {t}"))
            }
            ComponentSelection::Count(0) => return fail("pca_components must be positive".into()),
            _ => {}
        }
        for (name, v) in [
            ("patch_size", self.patch_size),
            ("rnn.hidden", self.rnn_hidden),
            ("rnn.group", self.rnn_group),
            ("rnn.fc1", self.rnn_fc1),
            ("cnn.fc1", self.cnn_fc1),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        for (name, lr) in [("rnn.lr", self.rnn_lr), ("cnn.lr", self.cnn_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return fail(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(0.0..1.0).contains(&self.cnn_dropout) {
            return fail(format!("cnn.dropout must lie in [0, 1), got {}", self.cnn_dropout));
        }
        Ok(())
    }

    /// Current value of a key as it would be written back.
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "cube_path" => self.cube_path.display().to_string(),
            "labels_path" => self.labels_path.display().to_string(),
            "seed" => self.seed.to_string(),
            "labeled_fraction" => self.labeled_fraction.to_string(),
            "validation_fraction" => self.validation_fraction.to_string(),
            "pca_variance_target" => match self.pca {
                ComponentSelection::VarianceTarget(t) => t.to_string(),
                ComponentSelection::Count(_) => return None,
            },
            "pca_components" => match self.pca {
                ComponentSelection::Count(n) => n.to_string(),
                ComponentSelection::VarianceTarget(_) => return None,
            },
            "patch_size" => self.patch_size.to_string(),
            "rnn.hidden" => self.rnn_hidden.to_string(),
            "rnn.group" => self.rnn_group.to_string(),
            "rnn.fc1" => self.rnn_fc1.to_string(),
            "rnn.lr" => self.rnn_lr.to_string(),
            "rnn.epochs" => self.rnn_epochs.to_string(),
            "cnn.lr" => self.cnn_lr.to_string(),
            "cnn.epochs" => self.cnn_epochs.to_string(),
            "cnn.dropout" => self.cnn_dropout.to_string(),
            "cnn.fc1" => self.cnn_fc1.to_string(),
            "cotrain.n_update" => self.n_update.to_string(),
            "cotrain.max_iterations" => self.max_iterations.to_string(),
            "cotrain.mode" => self.mode.to_string(),
            "cotrain.dcpe_pool" => self.dcpe_pool.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Full config as parseable text. Floats use the shortest form that
    /// reads back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            if let Some(v) = self.get(key) {
                writeln!(out, "{key} = {v}").unwrap();
            }
        }
        out
    }
}

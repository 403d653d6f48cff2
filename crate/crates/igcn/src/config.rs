//! Experiment configuration files.

use std::path::{Path, PathBuf};

use igcn_core::{TrainConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{io_err, Error, Result};

/// Training hyperparameters as they appear in JSON; omitted keys take the
/// [`TrainConfig`] defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub max_epochs: usize,
    pub min_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub hidden_width: usize,
    pub dropout_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            max_epochs: d.max_epochs,
            min_epochs: d.min_epochs,
            patience: d.patience,
            learning_rate: d.learning_rate,
            hidden_width: d.hidden_width,
            dropout_rate: d.dropout_rate,
        }
    }
}

impl TrainSection {
    pub fn to_config(self, seed: u64, variant: Variant) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            min_epochs: self.min_epochs,
            patience: self.patience,
            learning_rate: self.learning_rate,
            hidden_width: self.hidden_width,
            dropout_rate: self.dropout_rate,
            seed,
            variant,
        }
    }
}

fn default_runs() -> usize {
    10
}

fn default_variant() -> String {
    Variant::Full.name().into()
}

fn default_sweep() -> Vec<f64> {
    vec![3.0, 5.0, 7.0, 9.0]
}

/// Run `r` of an experiment splits and initializes with `seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative to the config file.
    pub manifest: PathBuf,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sweep")]
    pub k_sweep: Vec<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(manifest: PathBuf) -> Self {
        Self {
            manifest,
            train: TrainSection::default(),
            runs: default_runs(),
            variant: default_variant(),
            seed: 0,
            k_sweep: default_sweep(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut c: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        self.parsed_variant()?;
        if self.k_sweep.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config(format!("k_sweep {:?} must be positive", self.k_sweep)));
        }
        self.train_config(0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn parsed_variant(&self) -> Result<Variant> {
        Variant::parse(&self.variant).ok_or_else(|| {
            Error::Config(format!(
                "unknown variant {:?} (expected full, no-attention or mlp-head)",
                self.variant
            ))
        })
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    /// Training configuration of run `run`.
    pub fn train_config(&self, run: usize) -> TrainConfig {
        let variant = self.parsed_variant().unwrap_or_default();
        self.train.to_config(self.run_seed(run), variant)
    }

    pub fn load_manifest(&self) -> Result<DatasetManifest> {
        DatasetManifest::load(&self.base_dir.join(&self.manifest))
    }
}

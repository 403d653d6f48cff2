//! File formats, dataset loading, synthetic data, experiment protocols and
//! the `igcn` command-line tool, on top of [`igcn_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod gradcheck;
pub mod model_file;
pub mod synth;

pub use config::{ExperimentConfig, TrainSection};
pub use dataset::{load_dataset, save_dataset, DatasetManifest, LoadedDataset, RawDataset};
pub use error::{Error, Result};
pub use experiment::{
    ablation_run, export_attention, k_sweep, run_experiment, AblationReport, RunOutcome,
    SweepReport,
};
pub use igcn_core;
pub use synth::{generate_synthetic, write_synthetic, SyntheticSpec};

//! Experiment orchestration: datasets x classifiers x impostor variants,
//! persisted models, per-cell reports, summary grids and the command line.
//!
//! Output layout under the configured directory:
//! `models/<dataset>/`, `reports/`, `roc/<dataset>/`, `summary/`.

pub mod cli;
pub mod config;
pub mod report;
pub mod run;

pub use config::{AttackConfig, AugmentationConfig, DatasetConfig, DatasetSource, ExperimentConfig, Variant};
pub use report::{emit_summary, summarize, write_run, DatasetSummary};
pub use run::{cell_seed, load_dataset, run_experiment, CellRecord, RunOptions, RunRecord};

//! Configured experiments: config files, parallel runs, record files and summaries.

pub mod config;
pub mod run;
pub mod summary;

pub use config::{ExperimentConfig, Method};
pub use run::{build_environment, export_env, run_experiment, Environment, RunOptions, RunSummary};
pub use summary::{summarize, write_summary_csv, SummaryRow};

//! Configuration-driven Monte Carlo experiments over waveforms, estimators,
//! scenes and metrics, plus network synchronization scenarios, with
//! deterministic CSV and summary reports.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, Metric, ScenarioSpec};
pub use error::HarnessError;
pub use report::{emit_report, read_csv, summarize, write_csv, write_summary, ReportFormat, ResultRow, CSV_HEADER};
pub use runner::{run_experiment, run_trial, run_with, trial_seed, RunOptions, RunOutput, TrialRecord};

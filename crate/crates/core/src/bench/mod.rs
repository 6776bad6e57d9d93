//! Experiment configuration, the training loop, CSV logs and comparisons.

mod config;
mod report;
mod runner;

pub use config::{ConfigError, DatasetKind, OptimizerKind, RunConfig, DATA_DIR_ENV};
pub use report::{
    compare_runs, meta_path, parse_records, records_to_csv, write_run, Comparison, ComparisonRow, LoggedRun,
    ReportError, CSV_HEADER,
};
pub use runner::{
    epochs_to_threshold, median, median_with_missing, prepare_data, run_experiment, run_mlp, run_seeds, summarize,
    test_metric, RunError, RunLog, SeedSummary, Stepper, StopReason, TrainingRecord,
};

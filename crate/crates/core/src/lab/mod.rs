//! Experiment runner: configuration, orchestration and report files.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind, LabConfig};
pub use report::{emit_reports, ComparisonRow, ExperimentReport, ReportBundle, Status};
pub use runner::{run_bundle, run_experiment, RunOptions};

/// Process exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 4;
/// Process exit status for I/O failures while reading or writing.
pub const EXIT_IO: i32 = 1;

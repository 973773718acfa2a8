//! Config-driven synthetic experiments writing CSV.
//!
//! Each experiment expands its config into independent `(algorithm, M, seed)`
//! runs, executes them on the rayon pool, and aggregates over seeds after all
//! runs finish. Results are collected in job order, so output bytes do not
//! depend on the number of threads.

pub mod config;
pub mod csv;
pub mod runners;
pub mod stats;

pub use config::{Bandwidth, BatchSize, ExperimentConfig, ExperimentKind};
pub use csv::{read_csv, CsvData, Table, Value};
pub use runners::{run_experiment, ExperimentOutput, RESOLVED_CONFIG_FILE};

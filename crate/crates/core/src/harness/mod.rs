//! Experiment orchestration: configuration, seeded Monte Carlo runs, metric
//! series, steady-state analysis against simulation, and the invariant suite.

pub mod analyze;
pub mod config;
pub mod metrics;
pub mod runner;
pub mod validate;

pub use config::{parse_config, AlgorithmConfig, AlgorithmKind, BoundConfig, ExperimentConfig};
pub use metrics::{read_csv, sinr_linear, sinr_of, write_csv, write_csv_to, CsvRow, MetricSeries};
pub use runner::{run_experiment, run_experiment_at, run_experiment_with_threads, ExperimentResult, RunRecord};

//! Dataset ingestion, synthetic data, experiment reports and sweeps.

pub mod config;
pub mod dataset;
pub mod report;
pub mod sweep;

pub use config::{DataSource, ExperimentConfig, OUT_DIR_ENV};
pub use dataset::{generate_synthetic, load_dataset, read_dataset, write_dataset, SyntheticSpec};
pub use report::{run_classical, run_experiment, ExperimentReport};
pub use sweep::{loglog_slope, run_sweep, SweepAxis, SweepReport, SweepSpec};

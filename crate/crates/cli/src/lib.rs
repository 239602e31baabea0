//! Monte-Carlo experiment harness for node-adaptive graph signal
//! reconstruction, and the library side of the `gsr` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod table;

pub use config::{DatasetMode, Experiment, ExperimentConfig, Method, NoiseEstimate};
pub use error::{CliError, Result};
pub use experiment::{run, run_dataset, run_synthetic_denoise, run_synthetic_interpolate};
pub use table::{emit_csv, parse_csv, ResultRow, ResultTable};

//! Command-line front end for `softcca-core`: TOML experiment
//! configuration, resumable training with binary checkpoints, CSV metrics,
//! evaluation and the decorrelation scaling benchmark.

pub mod bench;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

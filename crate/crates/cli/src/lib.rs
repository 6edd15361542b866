//! Command-line driver for `ntci-core`: TOML experiment configs, a rayon
//! executor, and the path, report and manifest file formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use exec::RayonExecutor;

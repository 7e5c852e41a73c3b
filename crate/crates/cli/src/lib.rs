//! Configuration, file formats and subcommands of the `rarefy` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "RAREFY_OUT_DIR";

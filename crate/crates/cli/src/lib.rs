//! Configuration, workflows and run-directory artifacts behind the `pixiso`
//! command.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

pub use commands::{
    cmd_baseline, cmd_export_mask, cmd_optimize, cmd_report, cmd_simulate, optimize_with, OptimizeOptions,
    OptimizeOutcome,
};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{CliError, Result};

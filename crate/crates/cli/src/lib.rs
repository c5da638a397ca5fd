//! Batch front end for the renewal Hawkes library: configuration parsing,
//! subcommand dispatch and deterministic artifact output.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Cli, CliError};
pub use config::{normalize, parse_config, RunConfig};

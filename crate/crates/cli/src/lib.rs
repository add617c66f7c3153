//! Experiment harness behind the `quantsc` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod sweep;

pub use error::{CliError, CliResult};

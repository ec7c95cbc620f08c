//! The `ipir` command line: subcommands, scenario files and report rendering.

pub mod args;
pub mod commands;
mod error;
pub mod inputs;
pub mod render;
pub mod reports;

pub use error::{CliError, CliResult};

//! Configuration loading, run orchestration and output writing for the
//! `stefan` command-line tool.

pub mod config;
pub mod error;
pub mod output;
pub mod preset;
pub mod run;

pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;

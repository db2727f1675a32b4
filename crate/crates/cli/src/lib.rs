//! Command-line front end for the ssprofile solvers.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::{emit_config, parse_config, parse_config_with, split_overrides, Command, RunConfig};
pub use error::CliError;
pub use pipeline::{run_pipeline, RunOutcome};

//! Batch runner: one TOML experiment file, one subcommand, a directory of
//! CSV tables plus a text summary.

pub mod config;
pub mod run;

pub use config::{Diagnostic, ExperimentConfig};
pub use run::{run, run_file, Command, Outcome, RunError, RunOptions, Status};

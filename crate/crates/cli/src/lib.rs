//! Command-line front end for `pseudoroll`: scenario files in, CSV and JSON out.

pub mod commands;
pub mod scenario;
pub mod selftest;
pub mod table;

use std::path::PathBuf;

pub use commands::{run, Command, Options, Outcome};
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad scenario, flags or input files (exit code 2).
    #[error("input error: {0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// A library call failed on otherwise valid input (exit code 2).
    #[error(transparent)]
    Compute(#[from] pseudoroll::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

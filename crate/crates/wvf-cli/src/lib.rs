//! Experiment harness behind the `wvf` binary: config loading, pipeline
//! orchestration, CSV/SVG emission and run manifests.

pub mod config;
pub mod manifest;
pub mod run;

use thiserror::Error;

/// Harness errors, split by exit code: configuration problems exit 2,
/// stage failures exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage failure: {0}")]
    Stage(String),
}

impl CliError {
    /// Maps a core error found while interpreting configuration.
    pub fn from_config_source(e: wvf_core::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage(_) => 3,
        }
    }
}

impl From<wvf_core::Error> for CliError {
    fn from(e: wvf_core::Error) -> Self {
        CliError::Stage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Stage(e.to_string())
    }
}

//! Experiment driver around the selfik library: dataset generation,
//! training (coordinated loop and baselines), evaluation, sampling
//! benchmarks, and link-change adaptation, all file-based and fully
//! seeded.

pub mod commands;
pub mod config;

/// Command-level errors, split by exit code: configuration and usage
/// problems exit 1, runtime failures exit 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Core(#[from] selfik::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Core(_) => 2,
        }
    }
}

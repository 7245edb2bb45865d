//! Configuration and command execution behind the `cglauber` binary.

pub mod config;
pub mod run;

use thiserror::Error;

pub use config::{parse_config, read_config, write_config, RunConfig};
pub use run::{execute, resolve_output_dir, Outcome, OUT_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, an unreadable or invalid configuration, or parameters the
    /// library rejects. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running or writing outputs. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<corrupted_glauber::Error> for CliError {
    fn from(e: corrupted_glauber::Error) -> Self {
        use corrupted_glauber::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::SizeLimit(_)
            | E::Dimension(_)
            | E::OutOfRegime(_)
            | E::UnknownScenario(_)
            | E::Parse(_)
            | E::InvalidData(_)
            | E::UndefinedRatio(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

//! Library half of the `rembed` command-line tool; `main.rs` is a thin
//! clap wrapper around `commands::run`.

pub mod commands;
pub mod report;
pub mod verify;

/// Exit discipline: 0 success, 1 a verification or metric check failed,
/// 2 usage or input errors.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable/malformed inputs: exit 2.
    Input(String),
    /// A check ran and failed: exit 1.
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::CheckFailed(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) => m,
            CliError::CheckFailed(m) => m,
        }
    }
}

impl From<rembed_core::Error> for CliError {
    fn from(e: rembed_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::fmt;
use std::path::Path;

use finsler_core::FinslerError;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_LINE_SEARCH: i32 = 4;

/// An error with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<FinslerError> for CliError {
    fn from(e: FinslerError) -> Self {
        let code = match e {
            FinslerError::Solver(_) | FinslerError::Infeasible => EXIT_SOLVER,
            FinslerError::LineSearch(_) | FinslerError::NotDescent { .. } => EXIT_LINE_SEARCH,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

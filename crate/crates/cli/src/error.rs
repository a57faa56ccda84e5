use std::fmt;

use crate::config::Diagnostic;

/// CLI failure classes; each maps to one exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Configuration did not parse or failed validation (exit 2).
    Validation(Vec<Diagnostic>),
    /// Error raised by the physics or analysis code (exit 3).
    Physics(String),
    /// Reading inputs or writing outputs failed (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(context: impl fmt::Display, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(d) => {
                write!(f, "invalid configuration ({} error{})", d.len(), if d.len() == 1 { "" } else { "s" })?;
                for d in d {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            CliError::Physics(m) => f.write_str(m),
            CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<coldamp::Error> for CliError {
    fn from(e: coldamp::Error) -> Self {
        match e {
            coldamp::Error::Io(m) => CliError::Io(m),
            e @ coldamp::Error::Parse { .. } => CliError::Io(e.to_string()),
            e => CliError::Physics(e.to_string()),
        }
    }
}

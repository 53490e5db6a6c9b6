use std::fmt;

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration (exit 2).
    Config(String),
    /// Requested problem exceeds a basis size cap (exit 3).
    Cap(String),
    /// Anything that fails while running (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Cap(m) => write!(f, "resource cap: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<rydsim::Error> for CliError {
    fn from(e: rydsim::Error) -> Self {
        use rydsim::Error as E;
        match e {
            E::SizeCap { .. } => CliError::Cap(e.to_string()),
            E::InvalidArgument(_) | E::NotSquareGrid(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

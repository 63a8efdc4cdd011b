use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use cgp_core::CgpError;

/// CLI-level error with a stable exit-code mapping:
/// 2 configuration, 3 data/I-O, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Core(CgpError),
    Io { path: String, source: std::io::Error },
    Parse(String),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Parse(msg) => write!(f, "{msg}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Usage(_) => 2,
            CliError::Core(CgpError::Config(_)) => 2,
            CliError::Core(CgpError::Numerical(_)) => 4,
            CliError::Core(_) => 3,
            CliError::Io { .. } | CliError::Parse(_) => 3,
        };
        ExitCode::from(code)
    }
}

impl From<CgpError> for CliError {
    fn from(e: CgpError) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

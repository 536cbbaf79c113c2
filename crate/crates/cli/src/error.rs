use std::path::Path;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, with the file it came from.
    #[error("{path}: {message}")]
    Input { path: String, message: String },

    #[error(transparent)]
    Lib(#[from] blockpd::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest check failed: {0}")]
    Manifest(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(blockpd::Error::CorollaryInfeasible { .. }) => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Anchors JSON syntax and schema errors at `path:line:column`.
    pub fn json(path: &Path, e: &serde_json::Error) -> Self {
        let path = if e.line() > 0 {
            format!("{}:{}:{}", path.display(), e.line(), e.column())
        } else {
            path.display().to_string()
        };
        CliError::Input {
            path,
            message: e.to_string(),
        }
    }

    /// Reports library errors raised while reading `path`, anchoring JSON errors.
    pub fn from_lib_in(path: &Path, e: blockpd::Error) -> Self {
        match e {
            blockpd::Error::Json(j) => Self::json(path, &j),
            other => CliError::Input {
                path: path.display().to_string(),
                message: other.to_string(),
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

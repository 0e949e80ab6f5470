use std::path::PathBuf;

use regret_bw::ErrorKind;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] regret_bw::Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    Data { path: PathBuf, line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => ErrorKind::Config,
            CliError::Data { .. } => ErrorKind::Data,
            CliError::Io { .. } => ErrorKind::Config,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }

    /// Machine-readable form written on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: String,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let kind = match self.kind() {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        };
        let env = Envelope { error: Body { kind, exit_code: self.exit_code(), message: self.to_string() } };
        serde_json::to_string(&env).expect("error envelope serializes")
    }
}

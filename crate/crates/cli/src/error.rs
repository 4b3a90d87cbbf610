use std::path::PathBuf;

use longrun_npc::NpcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{0}")]
    Model(NpcError),

    #[error("numerical failure: {0}")]
    Numerical(NpcError),

    #[error("{0} required validation check(s) failed")]
    ValidationFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<NpcError> for CliError {
    fn from(e: NpcError) -> Self {
        match e {
            NpcError::Factorization(_)
            | NpcError::NonFinite(_)
            | NpcError::NonFiniteState { .. }
            | NpcError::DegenerateRegressor(_)
            | NpcError::Inadmissible(_) => CliError::Numerical(e),
            _ => CliError::Model(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

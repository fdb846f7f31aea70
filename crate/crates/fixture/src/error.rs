//! Error type for fixture generation and materialization.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A git subprocess failed while materializing a repository.
    #[error("git failed in `{dir}`: {detail}")]
    Git { dir: PathBuf, detail: String },

    /// The plan violates a structural invariant.
    #[error("invalid fixture plan: {0}")]
    Constraint(String),

    /// Generation kept producing rejected plans.
    #[error("no acceptable plan for seed {seed} after {attempts} attempts")]
    Exhausted { seed: u64, attempts: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

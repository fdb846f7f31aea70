//! Error type shared by the library.

use std::path::PathBuf;

/// Errors produced by mining, parsing, and scoring.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A commit identifier could not be resolved in the repository.
    #[error("cannot resolve commit `{ident}`: {detail}")]
    CommitIdentifier { ident: String, detail: String },

    /// The repository path is missing, unreadable, or not a repository.
    #[error("cannot access repository at `{path}`: {detail}")]
    RepoAccess { path: PathBuf, detail: String },

    /// A git subprocess failed or produced output we cannot use.
    #[error("git failure: {0}")]
    Git(String),

    /// Method span extraction failed for a source text.
    #[error("method extraction failed at line {line}: {detail}")]
    Extraction { line: usize, detail: String },

    /// A signature could not be normalized into a method identity.
    #[error("cannot normalize signature `{signature}`: {detail}")]
    Normalize { signature: String, detail: String },

    /// A call-graph file line could not be parsed.
    #[error("call graph parse error at line {line}: {detail}")]
    GraphParse { line: usize, detail: String },

    /// A requested test method is not a node of the call graph.
    #[error("unknown test method `{0}`")]
    UnknownTest(String),

    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input file is malformed or inconsistent.
    #[error("input error: {0}")]
    Input(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

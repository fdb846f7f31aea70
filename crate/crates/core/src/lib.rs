//! Black-box test-suite minimization driven by change history.
//!
//! The pipeline mines a version-controlled repository for per-method change
//! records, normalizes method signatures so parameter renames do not split a
//! method's history, derives change-proneness values from the mined ledger,
//! maps each test method to the production methods it can reach in a static
//! call graph, scores tests by aggregating the change proneness of their
//! dependencies, and keeps the top slice of the ranking under a size budget.
//! An evaluator compares minimized suites against per-version fault ground
//! truth and tests significance with Fisher's exact test.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`method`]: method identity and signature normalization
//! - [`ledger`]: change ledgers and their CSV form
//! - [`extract`]: method span extraction from source text
//! - [`diff`]: unified-diff parsing and per-method change attribution
//! - [`mine`]: history walking over a git repository
//! - [`cp`]: change-proneness metrics
//! - [`graph`]: call graphs, parsing, and dependency closure
//! - [`score`]: test scoring, ranking, and budgeted selection
//! - [`stats`]: Fisher's exact test and odds ratio
//! - [`eval`]: accuracy, fault-detection rate, and report assembly

pub mod cp;
pub mod diff;
pub mod error;
pub mod eval;
pub mod extract;
pub mod graph;
pub mod ledger;
pub mod method;
pub mod mine;
pub mod score;
pub mod stats;

pub use error::{Error, Result};
pub use method::{normalize_signature, MethodId};

//! Seeded synthetic repositories with planted ground truth.
//!
//! A fixture is a fully explicit edit plan: which methods exist, which
//! lines change in which commit, which tests call what, and which
//! versions which tests would catch. The plan is materialized into a
//! real git repository, and every derived quantity is recomputed here
//! from first principles so the production pipeline can be checked
//! against an implementation that shares none of its code.

pub mod bulk;
pub mod error;
pub mod gen;
pub mod oracle;
pub mod repo;
pub mod script;

pub use error::{Error, Result};
pub use gen::{generate, GenParams};
pub use script::FixtureScript;

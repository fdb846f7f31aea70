//! Fixture scripts: a fully explicit plan for a synthetic repository.
//!
//! A script records every edit the generator decided to make, the call
//! graph it invented, the faults it planted, and the values the oracle
//! computed from the plan alone. Materializing the script produces a
//! real git repository whose mined ledger must match `expected`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One source file in the fixture, holding a single class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePlan {
    pub path: String,
    pub class_name: String,
}

/// One method, with every parameter-identifier variant it will ever use.
///
/// `variants[k]` is the raw signature while variant `k` is active; all
/// variants share `canonical_id`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodPlan {
    pub index: usize,
    pub file: usize,
    pub name: String,
    pub param_types: Vec<String>,
    pub canonical_id: String,
    pub variants: Vec<String>,
}

/// A single edit applied to one method in one commit.
///
/// Each edit touches one contiguous line region, so with zero-context
/// diffs every edit is exactly one hunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edit {
    /// Method appears with `body_lines` statement lines.
    AddMethod { method: usize, body_lines: usize },
    /// Replace `del` body lines starting at body offset `at` with `ins`
    /// fresh lines. Either count may be zero, not both.
    EditBody {
        method: usize,
        at: usize,
        del: usize,
        ins: usize,
    },
    /// Advance to the next parameter-identifier variant.
    RenameParam { method: usize },
    /// Remove the whole method block.
    DeleteMethod { method: usize },
}

impl Edit {
    pub fn method(&self) -> usize {
        match *self {
            Edit::AddMethod { method, .. }
            | Edit::EditBody { method, .. }
            | Edit::RenameParam { method }
            | Edit::DeleteMethod { method } => method,
        }
    }
}

/// One commit: a message and the edits it applies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitPlan {
    pub index: usize,
    pub message: String,
    pub edits: Vec<Edit>,
}

/// Ledger row as the oracle predicts it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedRecord {
    pub change_commits: u64,
    pub total_commits: u64,
    pub insertions: u64,
    pub deletions: u64,
    pub modifications: u64,
}

/// Everything the oracle derived from the plan.
///
/// Keys for `rankings` are `metric-measure` labels; keys for
/// `selections`, `accuracy`, and `fdr` append a `-b25`/`-b50`/`-b75`
/// budget suffix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub history_len: usize,
    pub raw_ledger: BTreeMap<String, ExpectedRecord>,
    pub ledger: BTreeMap<String, ExpectedRecord>,
    pub cp: BTreeMap<String, BTreeMap<String, f64>>,
    pub dependencies: BTreeMap<String, BTreeSet<String>>,
    pub rankings: BTreeMap<String, Vec<String>>,
    pub selections: BTreeMap<String, Vec<String>>,
    pub accuracy: BTreeMap<String, BTreeMap<String, f64>>,
    pub fdr: BTreeMap<String, f64>,
}

/// The complete fixture plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureScript {
    pub seed: u64,
    pub attempt: u32,
    pub files: Vec<FilePlan>,
    pub methods: Vec<MethodPlan>,
    pub commits: Vec<CommitPlan>,
    pub tests: Vec<String>,
    pub graph_edges: Vec<(String, String)>,
    pub fault_plants: BTreeMap<String, BTreeSet<String>>,
    pub expected: Expected,
}

impl FixtureScript {
    /// Raw signature of `method` while variant `variant` is active.
    pub fn raw_signature(&self, method: usize, variant: usize) -> &str {
        &self.methods[method].variants[variant]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FixtureScript> {
        let text = fs::read_to_string(path)?;
        let script = serde_json::from_str(&text)?;
        Ok(script)
    }

    /// Sanity checks on plan shape; generation bugs surface here rather
    /// than as mysterious ledger mismatches.
    pub fn validate(&self) -> Result<()> {
        if self.commits.is_empty() {
            return Err(Error::Constraint("script has no commits".into()));
        }
        for m in &self.methods {
            if m.file >= self.files.len() {
                return Err(Error::Constraint(format!(
                    "method {} references missing file {}",
                    m.index, m.file
                )));
            }
            if m.variants.is_empty() {
                return Err(Error::Constraint(format!(
                    "method {} has no signature variants",
                    m.index
                )));
            }
        }
        let mut alive: Vec<Option<usize>> = vec![None; self.methods.len()];
        for commit in &self.commits {
            let mut touched = BTreeSet::new();
            for edit in &commit.edits {
                let m = edit.method();
                if m >= self.methods.len() {
                    return Err(Error::Constraint(format!(
                        "commit {} edits missing method {m}",
                        commit.index
                    )));
                }
                if !touched.insert(m) {
                    return Err(Error::Constraint(format!(
                        "commit {} touches method {m} twice",
                        commit.index
                    )));
                }
                match *edit {
                    Edit::AddMethod { method, body_lines } => {
                        if alive[method].is_some() {
                            return Err(Error::Constraint(format!(
                                "commit {} re-adds live method {method}",
                                commit.index
                            )));
                        }
                        if body_lines == 0 {
                            return Err(Error::Constraint(format!(
                                "commit {} adds method {method} with empty body",
                                commit.index
                            )));
                        }
                        alive[method] = Some(body_lines);
                    }
                    Edit::EditBody {
                        method,
                        at,
                        del,
                        ins,
                    } => {
                        let Some(len) = alive[method] else {
                            return Err(Error::Constraint(format!(
                                "commit {} edits dead method {method}",
                                commit.index
                            )));
                        };
                        if del == 0 && ins == 0 {
                            return Err(Error::Constraint(format!(
                                "commit {} applies an empty edit to method {method}",
                                commit.index
                            )));
                        }
                        if at + del > len {
                            return Err(Error::Constraint(format!(
                                "commit {} edit overruns method {method} body",
                                commit.index
                            )));
                        }
                        let next = len - del + ins;
                        if next == 0 {
                            return Err(Error::Constraint(format!(
                                "commit {} empties method {method} body",
                                commit.index
                            )));
                        }
                        alive[method] = Some(next);
                    }
                    Edit::RenameParam { method } => {
                        if alive[method].is_none() {
                            return Err(Error::Constraint(format!(
                                "commit {} renames dead method {method}",
                                commit.index
                            )));
                        }
                    }
                    Edit::DeleteMethod { method } => {
                        if alive[method].take().is_none() {
                            return Err(Error::Constraint(format!(
                                "commit {} deletes dead method {method}",
                                commit.index
                            )));
                        }
                    }
                }
            }
        }
        let mut renames: Vec<usize> = vec![0; self.methods.len()];
        for commit in &self.commits {
            for edit in &commit.edits {
                if let Edit::RenameParam { method } = *edit {
                    renames[method] += 1;
                    if renames[method] + 1 > self.methods[method].variants.len() {
                        return Err(Error::Constraint(format!(
                            "method {method} runs out of signature variants"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Budget grid used by expected selections: label suffix and exact
/// fraction numerator/denominator.
pub const BUDGETS: [(&str, u64, u64); 3] = [("b25", 1, 4), ("b50", 1, 2), ("b75", 3, 4)];

/// Metric labels in a fixed order.
pub const METRICS: [&str; 2] = ["chgfreq", "chgext"];

/// Measure labels in a fixed order.
pub const MEASURES: [&str; 4] = ["avg", "gmean", "hmean", "median"];

/// `metric-measure` label for ranking keys.
pub fn config_label(metric: &str, measure: &str) -> String {
    format!("{metric}-{measure}")
}

/// `metric-measure-bNN` label for selection keys.
pub fn selection_label(metric: &str, measure: &str, budget: &str) -> String {
    format!("{metric}-{measure}-{budget}")
}

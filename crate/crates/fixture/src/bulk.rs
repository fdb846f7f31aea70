//! Large synthetic history for throughput checks.
//!
//! Unlike scripted fixtures there is no oracle here: the point is a
//! repository with on the order of a thousand commits that a miner has
//! to chew through, built in one fast-import pass.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::repo::{import_into, import_stream, RenderedCommit, EPOCH};

#[derive(Clone, Debug)]
pub struct BulkParams {
    pub files: usize,
    pub methods_per_file: usize,
    pub commits: usize,
    pub max_edits_per_commit: usize,
}

impl Default for BulkParams {
    fn default() -> BulkParams {
        BulkParams {
            files: 12,
            methods_per_file: 8,
            commits: 1000,
            max_edits_per_commit: 3,
        }
    }
}

struct BulkModel {
    params: BulkParams,
    bodies: Vec<Vec<String>>,
    counter: u64,
}

impl BulkModel {
    fn method_count(&self) -> usize {
        self.params.files * self.params.methods_per_file
    }

    fn fresh(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| {
                self.counter += 1;
                format!("        work_{}();", self.counter)
            })
            .collect()
    }

    fn render_file(&self, file: usize) -> String {
        let mut out = format!("class B{file} {{ // begin B{file}\n");
        for k in 0..self.params.methods_per_file {
            let m = file * self.params.methods_per_file + k;
            out.push_str(&format!("    int m{m}() {{ // open m{m}\n"));
            for line in &self.bodies[m] {
                out.push_str(line);
                out.push('\n');
            }
            out.push_str(&format!("    }} // close m{m}\n"));
        }
        out.push_str(&format!("}} // end B{file}\n"));
        out
    }
}

/// Build a `params.commits`-commit repository under `repo` and return
/// the method identifiers it contains.
pub fn build_bulk_repo(repo: &Path, params: &BulkParams, seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = BulkModel {
        params: params.clone(),
        bodies: Vec::new(),
        counter: 0,
    };
    for _ in 0..model.method_count() {
        let body = model.fresh(3);
        model.bodies.push(body);
    }

    let mut commits = Vec::with_capacity(params.commits);
    let initial: Vec<(String, String)> = (0..params.files)
        .map(|f| (format!("src/B{f}.java"), model.render_file(f)))
        .collect();
    commits.push(RenderedCommit {
        message: "c0".into(),
        timestamp: EPOCH,
        files: initial,
    });

    for c in 1..params.commits {
        let edits = rng.gen_range(1..=params.max_edits_per_commit);
        let mut touched_methods = BTreeSet::new();
        for _ in 0..edits {
            touched_methods.insert(rng.gen_range(0..model.method_count()));
        }
        let mut touched_files = BTreeSet::new();
        for &m in &touched_methods {
            let len = model.bodies[m].len();
            let del = rng.gen_range(0..=len.min(2).min(len - 1));
            let mut ins = rng.gen_range(0..=2);
            if del == 0 && ins == 0 {
                ins = 1;
            }
            let at = rng.gen_range(0..=len - del);
            let lines = model.fresh(ins);
            model.bodies[m].splice(at..at + del, lines);
            touched_files.insert(m / params.methods_per_file);
        }
        let files = touched_files
            .iter()
            .map(|&f| (format!("src/B{f}.java"), model.render_file(f)))
            .collect();
        commits.push(RenderedCommit {
            message: format!("c{c}"),
            timestamp: EPOCH + 60 * c as i64,
            files,
        });
    }

    let stream = import_stream(&commits);
    import_into(repo, &stream, commits.len())?;
    Ok((0..model.method_count())
        .map(|m| {
            let f = m / params.methods_per_file;
            format!("B{f}::m{m}()")
        })
        .collect())
}

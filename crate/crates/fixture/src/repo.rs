//! Turn a fixture script into a real git repository.
//!
//! Every generated source line is globally unique (statement lines
//! carry a running counter, brace lines carry the method name), so a
//! zero-context diff between any two rendered versions is forced to
//! align on the planned edit regions. The repository is written with a
//! single `git fast-import` run per fixture.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::script::{Edit, FixtureScript};

/// Commit timestamp base; commit `i` lands at `EPOCH + 60 * i`.
pub const EPOCH: i64 = 1_700_000_000;

/// One commit ready for import: full contents of each changed file.
#[derive(Clone, Debug)]
pub struct RenderedCommit {
    pub message: String,
    pub timestamp: i64,
    pub files: Vec<(String, String)>,
}

struct MethodState {
    alive: bool,
    variant: usize,
    body: Vec<String>,
}

fn fresh_lines(counter: &mut u64, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            *counter += 1;
            format!("        stmt_{counter}();")
        })
        .collect()
}

fn signature_tail(raw: &str) -> &str {
    raw.rsplit_once("::").map(|(_, tail)| tail).unwrap_or(raw)
}

fn render_file(script: &FixtureScript, state: &[MethodState], file: usize) -> String {
    let class = &script.files[file].class_name;
    let mut out = format!("class {class} {{ // begin {class}\n");
    for plan in script.methods.iter().filter(|m| m.file == file) {
        let st = &state[plan.index];
        if !st.alive {
            continue;
        }
        let tail = signature_tail(&plan.variants[st.variant]);
        out.push_str(&format!("    int {tail} {{ // open {}\n", plan.name));
        for line in &st.body {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("    }} // close {}\n", plan.name));
    }
    out.push_str(&format!("}} // end {class}\n"));
    out
}

/// Replay the plan into per-commit file snapshots.
pub fn render_commits(script: &FixtureScript) -> Vec<RenderedCommit> {
    let mut counter: u64 = 0;
    let mut state: Vec<MethodState> = script
        .methods
        .iter()
        .map(|_| MethodState {
            alive: false,
            variant: 0,
            body: Vec::new(),
        })
        .collect();
    let mut out = Vec::with_capacity(script.commits.len());
    for commit in &script.commits {
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        for edit in &commit.edits {
            let m = edit.method();
            touched.insert(script.methods[m].file);
            match *edit {
                Edit::AddMethod { body_lines, .. } => {
                    state[m].alive = true;
                    state[m].body = fresh_lines(&mut counter, body_lines);
                }
                Edit::EditBody { at, del, ins, .. } => {
                    let lines = fresh_lines(&mut counter, ins);
                    state[m].body.splice(at..at + del, lines);
                }
                Edit::RenameParam { .. } => state[m].variant += 1,
                Edit::DeleteMethod { .. } => {
                    state[m].alive = false;
                    state[m].body.clear();
                }
            }
        }
        let files = touched
            .iter()
            .map(|&f| (script.files[f].path.clone(), render_file(script, &state, f)))
            .collect();
        out.push(RenderedCommit {
            message: commit.message.clone(),
            timestamp: EPOCH + 60 * commit.index as i64,
            files,
        });
    }
    out
}

fn git_cmd(dir: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.current_dir(dir)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_SYSTEM", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env_remove("GIT_DIR")
        .env_remove("GIT_WORK_TREE")
        .env_remove("GIT_INDEX_FILE")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    cmd
}

fn run_git(dir: &Path, args: &[&str]) -> Result<String> {
    let output = git_cmd(dir).args(args).output()?;
    if !output.status.success() {
        return Err(Error::Git {
            dir: dir.to_path_buf(),
            detail: format!(
                "git {} failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

/// Serialize commits as a fast-import stream.
pub fn import_stream(commits: &[RenderedCommit]) -> Vec<u8> {
    let mut out = Vec::new();
    for commit in commits {
        let message = format!("{}\n", commit.message);
        let _ = write!(
            out,
            "commit refs/heads/main\ncommitter dev <dev@example.com> {} +0000\ndata {}\n{}",
            commit.timestamp,
            message.len(),
            message
        );
        for (path, content) in &commit.files {
            debug_assert!(content.ends_with('\n'));
            let _ = write!(
                out,
                "M 100644 inline {path}\ndata {}\n{content}",
                content.len()
            );
        }
    }
    out.extend_from_slice(b"done\n");
    out
}

/// Create an empty repository and load the stream into `main`.
pub fn import_into(repo: &Path, stream: &[u8], expected_commits: usize) -> Result<()> {
    fs::create_dir_all(repo)?;
    run_git(repo, &["init", "-q", "-b", "main"])?;
    let mut child = git_cmd(repo)
        .args(["fast-import", "--quiet", "--done"])
        .stdin(Stdio::piped())
        .spawn()?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(stream)?;
    let output = child.wait_with_output()?;
    if !output.status.success() {
        return Err(Error::Git {
            dir: repo.to_path_buf(),
            detail: format!(
                "fast-import failed: {}",
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }
    let count = run_git(repo, &["rev-list", "--count", "main"])?;
    if count.trim() != expected_commits.to_string() {
        return Err(Error::Git {
            dir: repo.to_path_buf(),
            detail: format!(
                "imported {} commits, planned {expected_commits}",
                count.trim()
            ),
        });
    }
    Ok(())
}

/// Materialize the script's repository under `repo`.
pub fn materialize(script: &FixtureScript, repo: &Path) -> Result<()> {
    let rendered = render_commits(script);
    let stream = import_stream(&rendered);
    import_into(repo, &stream, rendered.len())
}

/// Commit hash of the branch tip.
pub fn head_commit(repo: &Path) -> Result<String> {
    Ok(run_git(repo, &["rev-parse", "main"])?.trim().to_string())
}

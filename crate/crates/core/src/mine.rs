//! Git history mining: walks the first-parent lineage of a repository and
//! attributes every diff line to a method span, producing a raw change
//! ledger keyed by raw signature.
//!
//! One `git log` subprocess streams all patches oldest-first; a persistent
//! `git cat-file --batch` child serves the file contents needed for span
//! extraction. Attribution per commit is pure, so commits are processed in
//! batches that may fan out over threads; the fold back into the ledger is
//! order-independent (sums plus min of first-seen).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use crate::diff::{attribute_diff, parse_unified_diff, DiffHunk, LineChanges};
use crate::error::{Error, Result};
use crate::extract::{extract_method_spans, LanguageProfile};
use crate::ledger::{ChangeRecord, RawLedger};

/// One commit on the linearized first-parent history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitMeta {
    pub hash: String,
    /// Ordinal position, 0 = oldest.
    pub index: usize,
    /// Committer timestamp, seconds since epoch.
    pub timestamp: i64,
}

/// Accumulated change counts for one raw signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawChangeRecord {
    /// Number of commits whose diff touched this signature.
    pub change_commits: u64,
    /// Earliest commit index where the signature was touched. Methods are
    /// introduced by inserted lines inside their own span, so the first
    /// touch is the introduction.
    pub first_seen_index: usize,
    pub insertions: u64,
    pub deletions: u64,
    pub modifications: u64,
}

/// Mining result before signature normalization.
#[derive(Clone, Debug, Default)]
pub struct ChangeLedger {
    pub records: BTreeMap<String, RawChangeRecord>,
    /// Total commits on the linearized history.
    pub history_len: usize,
}

impl ChangeLedger {
    /// Converts to the CSV-facing ledger shape; each method's commit
    /// denominator covers its lifetime, introduction through end.
    pub fn to_raw_ledger(&self) -> RawLedger {
        self.records
            .iter()
            .map(|(sig, r)| {
                let record = ChangeRecord {
                    change_commits: r.change_commits,
                    total_commits: (self.history_len - r.first_seen_index) as u64,
                    insertions: r.insertions,
                    deletions: r.deletions,
                    modifications: r.modifications,
                };
                (sig.clone(), record)
            })
            .collect()
    }
}

/// Everything `mine` produces: the ledger, the commit list it was mined
/// over, and per-file warnings for skipped versions.
#[derive(Clone, Debug)]
pub struct MineOutcome {
    pub ledger: ChangeLedger,
    pub commits: Vec<CommitMeta>,
    pub warnings: Vec<String>,
}

/// Base git invocation: pinned locale, no pager, path quoting off so diff
/// headers carry raw paths.
fn git(repo: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(repo);
    cmd.args(["-c", "core.quotepath=false"]);
    cmd.env("LC_ALL", "C");
    cmd.env_remove("GIT_DIR");
    cmd.env_remove("GIT_WORK_TREE");
    cmd.env_remove("GIT_INDEX_FILE");
    cmd.env_remove("GIT_EXTERNAL_DIFF");
    cmd.env_remove("GIT_PAGER");
    cmd.stdin(Stdio::null());
    cmd.stdout(Stdio::piped());
    cmd.stderr(Stdio::piped());
    cmd
}

fn run_git(repo: &Path, args: &[&str]) -> Result<Vec<u8>> {
    let out = git(repo)
        .args(args)
        .output()
        .map_err(|e| Error::Git(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        return Err(Error::Git(format!(
            "git {} failed: {}",
            args.join(" "),
            stderr.trim()
        )));
    }
    Ok(out.stdout)
}

fn check_repo(repo: &Path) -> Result<()> {
    match run_git(repo, &["rev-parse", "--git-dir"]) {
        Ok(_) => Ok(()),
        Err(Error::Git(detail)) => Err(Error::RepoAccess {
            path: repo.to_path_buf(),
            detail,
        }),
        Err(e) => Err(e),
    }
}

/// Resolves any commit-ish to a full hash.
pub fn resolve_commit(repo: &Path, ident: &str) -> Result<String> {
    check_repo(repo)?;
    let spec = format!("{ident}^{{commit}}");
    match run_git(repo, &["rev-parse", "--verify", "--quiet", &spec]) {
        Ok(out) => Ok(String::from_utf8_lossy(&out).trim().to_string()),
        Err(Error::Git(_)) => Err(Error::CommitIdentifier {
            ident: ident.to_string(),
            detail: "not a commit in this repository".to_string(),
        }),
        Err(e) => Err(e),
    }
}

/// First-parent history ending at `end_commit`, oldest first, indices dense
/// from 0.
pub fn linearize_history(repo: &Path, end_commit: &str) -> Result<Vec<CommitMeta>> {
    let end = resolve_commit(repo, end_commit)?;
    let out = run_git(
        repo,
        &["log", "--first-parent", "--reverse", "--format=%H %ct", &end],
    )?;
    let text = String::from_utf8_lossy(&out);
    let mut commits = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let (hash, ts) = line
            .split_once(' ')
            .ok_or_else(|| Error::Git(format!("unexpected log line `{line}`")))?;
        let timestamp = ts
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::Git(format!("bad timestamp in log line `{line}`")))?;
        commits.push(CommitMeta {
            hash: hash.to_string(),
            index,
            timestamp,
        });
    }
    if commits.is_empty() {
        return Err(Error::Git(format!("no commits reachable from {end}")));
    }
    Ok(commits)
}

/// Persistent `git cat-file --batch` child for blob lookups by `rev:path`.
struct CatFileBatch {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl CatFileBatch {
    fn spawn(repo: &Path) -> Result<Self> {
        let mut child = git(repo)
            .args(["cat-file", "--batch"])
            .stdin(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Git(format!("cannot spawn git cat-file: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(CatFileBatch {
            child,
            stdin,
            stdout,
        })
    }

    /// Blob content at `rev:path`, or `None` when the path is absent from
    /// that revision.
    fn fetch(&mut self, rev: &str, path: &str) -> Result<Option<Vec<u8>>> {
        if path.contains('\n') {
            // The batch protocol is line-based; such paths cannot be asked for.
            return Ok(None);
        }
        writeln!(self.stdin, "{rev}:{path}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Git(format!("cat-file request failed: {e}")))?;
        let mut header = String::new();
        self.stdout
            .read_line(&mut header)
            .map_err(|e| Error::Git(format!("cat-file response failed: {e}")))?;
        let header = header.trim_end();
        if header.is_empty() {
            return Err(Error::Git("cat-file stream closed early".to_string()));
        }
        if header.ends_with(" missing") || header.ends_with(" ambiguous") {
            return Ok(None);
        }
        let size: usize = header
            .rsplit(' ')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Git(format!("unexpected cat-file header `{header}`")))?;
        let mut buf = vec![0u8; size + 1];
        self.stdout
            .read_exact(&mut buf)
            .map_err(|e| Error::Git(format!("cat-file body truncated: {e}")))?;
        buf.pop();
        Ok(Some(buf))
    }
}

impl Drop for CatFileBatch {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One file's attribution inputs within one commit.
struct FileWork {
    path: String,
    old_text: Option<String>,
    new_text: Option<String>,
    hunks: Vec<DiffHunk>,
}

struct CommitWork {
    index: usize,
    hash: String,
    files: Vec<FileWork>,
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

/// Mines the repository up to `end_commit`. `jobs` bounds attribution
/// parallelism; 0 and 1 both mean sequential.
pub fn mine(
    repo: &Path,
    end_commit: &str,
    profile: &LanguageProfile,
    jobs: usize,
) -> Result<MineOutcome> {
    let jobs = jobs.max(1);
    let commits = linearize_history(repo, end_commit)?;
    let end_hash = commits.last().expect("nonempty history").hash.clone();
    let index_of: BTreeMap<&str, usize> =
        commits.iter().map(|c| (c.hash.as_str(), c.index)).collect();

    let mut log_child = git(repo)
        .args([
            "log",
            "--first-parent",
            "--reverse",
            "--no-color",
            "-p",
            "-M",
            "--unified=0",
            "--diff-merges=first-parent",
            "--no-textconv",
            "--no-ext-diff",
            "--src-prefix=a/",
            "--dst-prefix=b/",
            "--format=%x01%H",
        ])
        .arg(&end_hash)
        .spawn()
        .map_err(|e| Error::Git(format!("cannot spawn git log: {e}")))?;
    let mut reader = BufReader::new(log_child.stdout.take().expect("piped stdout"));
    let mut cat = CatFileBatch::spawn(repo)?;

    let mut records: BTreeMap<String, RawChangeRecord> = BTreeMap::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut pending: Vec<CommitWork> = Vec::new();
    let batch_cap = if jobs == 1 { 1 } else { jobs * 4 };

    let mut current_hash: Option<String> = None;
    let mut patch = String::new();
    let mut line_buf: Vec<u8> = Vec::new();
    let mut commits_seen = 0usize;
    loop {
        line_buf.clear();
        let n = reader.read_until(b'\n', &mut line_buf)?;
        let is_sentinel = n > 0 && line_buf.first() == Some(&1u8);
        if n == 0 || is_sentinel {
            if let Some(hash) = current_hash.take() {
                let index = *index_of.get(hash.as_str()).ok_or_else(|| {
                    Error::Git(format!("log produced commit {hash} outside the lineage"))
                })?;
                let work = prepare_commit_work(
                    index,
                    &hash,
                    &patch,
                    &commits,
                    profile,
                    &mut cat,
                    &mut warnings,
                )?;
                pending.push(work);
                if pending.len() >= batch_cap {
                    drain_batch(&mut pending, jobs, profile, &mut records, &mut warnings);
                }
                commits_seen += 1;
            }
            patch.clear();
            if n == 0 {
                break;
            }
            let line = String::from_utf8_lossy(&line_buf[1..]);
            current_hash = Some(line.trim().to_string());
        } else if current_hash.is_some() {
            patch.push_str(&String::from_utf8_lossy(&line_buf));
        }
    }
    drain_batch(&mut pending, jobs, profile, &mut records, &mut warnings);

    let status = log_child
        .wait()
        .map_err(|e| Error::Git(format!("git log did not finish: {e}")))?;
    if !status.success() {
        let mut stderr = String::new();
        if let Some(mut err) = log_child.stderr.take() {
            let _ = err.read_to_string(&mut stderr);
        }
        return Err(Error::Git(format!("git log failed: {}", stderr.trim())));
    }
    if commits_seen != commits.len() {
        return Err(Error::Git(format!(
            "patch stream covered {commits_seen} commits, expected {}",
            commits.len()
        )));
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(MineOutcome {
        ledger: ChangeLedger {
            records,
            history_len: commits.len(),
        },
        commits,
        warnings,
    })
}

/// Parses one commit's patch and fetches the blob texts attribution needs.
fn prepare_commit_work(
    index: usize,
    hash: &str,
    patch: &str,
    commits: &[CommitMeta],
    profile: &LanguageProfile,
    cat: &mut CatFileBatch,
    warnings: &mut Vec<String>,
) -> Result<CommitWork> {
    let mut files = Vec::new();
    for fd in parse_unified_diff(patch)? {
        if fd.is_binary || fd.hunks.is_empty() {
            continue;
        }
        let Some(fpath) = fd.filter_path() else {
            continue;
        };
        if !profile.matches_path(fpath) {
            continue;
        }
        let path = fpath.to_string();
        let old_text = match &fd.old_path {
            Some(p) if index > 0 => {
                match cat.fetch(&commits[index - 1].hash, p)? {
                    Some(bytes) => Some(String::from_utf8_lossy(&bytes).into_owned()),
                    None => {
                        warnings.push(format!(
                            "commit {}: {p}: old version unreadable; file skipped",
                            short(hash)
                        ));
                        continue;
                    }
                }
            }
            Some(p) => {
                warnings.push(format!(
                    "commit {}: {p}: diff names an old version before any parent; file skipped",
                    short(hash)
                ));
                continue;
            }
            None => None,
        };
        let new_text = match &fd.new_path {
            Some(p) => match cat.fetch(hash, p)? {
                Some(bytes) => Some(String::from_utf8_lossy(&bytes).into_owned()),
                None => {
                    warnings.push(format!(
                        "commit {}: {p}: new version unreadable; file skipped",
                        short(hash)
                    ));
                    continue;
                }
            },
            None => None,
        };
        files.push(FileWork {
            path,
            old_text,
            new_text,
            hunks: fd.hunks,
        });
    }
    Ok(CommitWork {
        index,
        hash: hash.to_string(),
        files,
    })
}

/// Pure per-commit attribution: spans from both sides, hunks credited.
fn attribute_commit(
    work: &CommitWork,
    profile: &LanguageProfile,
) -> (usize, BTreeMap<String, LineChanges>, Vec<String>) {
    let mut changes: BTreeMap<String, LineChanges> = BTreeMap::new();
    let mut warns = Vec::new();
    for fw in &work.files {
        let old_spans = match &fw.old_text {
            Some(text) => match extract_method_spans(text, profile) {
                Ok(spans) => spans,
                Err(e) => {
                    warns.push(format!(
                        "commit {}: {}: {e}; file skipped",
                        short(&work.hash),
                        fw.path
                    ));
                    continue;
                }
            },
            None => Vec::new(),
        };
        let new_spans = match &fw.new_text {
            Some(text) => match extract_method_spans(text, profile) {
                Ok(spans) => spans,
                Err(e) => {
                    warns.push(format!(
                        "commit {}: {}: {e}; file skipped",
                        short(&work.hash),
                        fw.path
                    ));
                    continue;
                }
            },
            None => Vec::new(),
        };
        for (sig, lc) in attribute_diff(&old_spans, &new_spans, &fw.hunks) {
            changes.entry(sig).or_default().absorb(lc);
        }
    }
    (work.index, changes, warns)
}

/// Runs attribution for queued commits, possibly on several threads, and
/// folds the results into the ledger. The fold is order-independent, but
/// results are still applied in index order so warnings stay sorted.
fn drain_batch(
    pending: &mut Vec<CommitWork>,
    jobs: usize,
    profile: &LanguageProfile,
    records: &mut BTreeMap<String, RawChangeRecord>,
    warnings: &mut Vec<String>,
) {
    if pending.is_empty() {
        return;
    }
    let batch = std::mem::take(pending);
    let mut results: Vec<(usize, BTreeMap<String, LineChanges>, Vec<String>)> =
        if jobs <= 1 || batch.len() == 1 {
            batch.iter().map(|w| attribute_commit(w, profile)).collect()
        } else {
            let chunk = batch.len().div_ceil(jobs);
            std::thread::scope(|scope| {
                let handles: Vec<_> = batch
                    .chunks(chunk)
                    .map(|ch| {
                        scope.spawn(move || {
                            ch.iter()
                                .map(|w| attribute_commit(w, profile))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("attribution thread panicked"))
                    .collect()
            })
        };
    results.sort_by_key(|r| r.0);
    for (index, changes, warns) in results {
        warnings.extend(warns);
        for (sig, lc) in changes {
            let rec = records.entry(sig).or_insert(RawChangeRecord {
                change_commits: 0,
                first_seen_index: index,
                insertions: 0,
                deletions: 0,
                modifications: 0,
            });
            rec.change_commits += 1;
            rec.first_seen_index = rec.first_seen_index.min(index);
            rec.insertions += lc.insertions;
            rec.deletions += lc.deletions;
            rec.modifications += lc.modifications;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_hash_is_stable_for_short_input() {
        assert_eq!(short("abc"), "abc");
        assert_eq!(short("0123456789abcdef"), "0123456789ab");
    }

    #[test]
    fn ledger_conversion_uses_lifetime_denominator() {
        let mut records = BTreeMap::new();
        records.insert(
            "C::f()".to_string(),
            RawChangeRecord {
                change_commits: 3,
                first_seen_index: 0,
                insertions: 5,
                deletions: 1,
                modifications: 2,
            },
        );
        records.insert(
            "C::g()".to_string(),
            RawChangeRecord {
                change_commits: 1,
                first_seen_index: 4,
                insertions: 3,
                deletions: 0,
                modifications: 0,
            },
        );
        let ledger = ChangeLedger {
            records,
            history_len: 5,
        };
        let raw = ledger.to_raw_ledger();
        assert_eq!(raw["C::f()"].total_commits, 5);
        assert_eq!(raw["C::g()"].total_commits, 1);
        assert_eq!(raw["C::g()"].insertions, 3);
    }
}

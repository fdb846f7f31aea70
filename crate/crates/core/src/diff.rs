//! Unified-diff parsing and per-method change attribution.
//!
//! Attribution works on line numbers only: each deleted line is credited to
//! the innermost old-version span containing it, each inserted line to the
//! innermost new-version span containing it. Within one hunk, paired
//! insert/delete lines that land in spans carrying the same raw signature
//! count as modifications (`min(insertions, deletions)` of that signature in
//! that hunk); the remainder stays as pure insertions or deletions. Lines
//! outside every span are discarded.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::extract::MethodSpan;

/// One hunk, reduced to the line numbers it touches.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiffHunk {
    /// 1-based line numbers deleted from the old file.
    pub deleted_lines: Vec<usize>,
    /// 1-based line numbers inserted into the new file.
    pub inserted_lines: Vec<usize>,
}

/// All hunks of one file within one commit's diff.
#[derive(Clone, Debug, Default)]
pub struct FileDiff {
    /// Old path; `None` when the file was created.
    pub old_path: Option<String>,
    /// New path; `None` when the file was deleted.
    pub new_path: Option<String>,
    pub hunks: Vec<DiffHunk>,
    pub is_binary: bool,
}

impl FileDiff {
    /// Path used for extension filtering: the surviving side.
    pub fn filter_path(&self) -> Option<&str> {
        self.new_path.as_deref().or(self.old_path.as_deref())
    }
}

/// Line-change counts attributed to one raw signature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LineChanges {
    pub insertions: u64,
    pub deletions: u64,
    pub modifications: u64,
}

impl LineChanges {
    pub fn is_zero(&self) -> bool {
        self.insertions == 0 && self.deletions == 0 && self.modifications == 0
    }

    pub fn absorb(&mut self, other: LineChanges) {
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.modifications += other.modifications;
    }
}

/// Innermost span containing a line: latest start, then earliest end.
fn innermost<'a>(spans: &'a [MethodSpan], line: usize) -> Option<&'a MethodSpan> {
    spans
        .iter()
        .filter(|s| s.contains(line))
        .max_by_key(|s| (s.start_line, std::cmp::Reverse(s.end_line)))
}

/// Attributes one file's hunks to method signatures.
///
/// `old_spans` come from the file before the commit, `new_spans` from after.
/// The per-hunk pairing rule means replacing two lines with three inside one
/// method yields one pure insertion and two modifications.
pub fn attribute_diff(
    old_spans: &[MethodSpan],
    new_spans: &[MethodSpan],
    hunks: &[DiffHunk],
) -> BTreeMap<String, LineChanges> {
    let mut out: BTreeMap<String, LineChanges> = BTreeMap::new();
    for hunk in hunks {
        let mut deleted: BTreeMap<&str, u64> = BTreeMap::new();
        let mut inserted: BTreeMap<&str, u64> = BTreeMap::new();
        for &line in &hunk.deleted_lines {
            if let Some(span) = innermost(old_spans, line) {
                *deleted.entry(span.raw_signature.as_str()).or_default() += 1;
            }
        }
        for &line in &hunk.inserted_lines {
            if let Some(span) = innermost(new_spans, line) {
                *inserted.entry(span.raw_signature.as_str()).or_default() += 1;
            }
        }
        let signatures: std::collections::BTreeSet<&str> = deleted
            .keys()
            .chain(inserted.keys())
            .copied()
            .collect();
        for sig in signatures {
            let del = deleted.get(sig).copied().unwrap_or(0);
            let ins = inserted.get(sig).copied().unwrap_or(0);
            let mods = del.min(ins);
            out.entry(sig.to_string()).or_default().absorb(LineChanges {
                insertions: ins - mods,
                deletions: del - mods,
                modifications: mods,
            });
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Parses `git diff` / `git log -p` style unified-diff text into per-file
/// hunks. Tolerates any context width; only `+`/`-` lines are recorded.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>> {
    let mut files: Vec<FileDiff> = Vec::new();
    let mut current: Option<FileDiff> = None;
    let mut old_line = 0usize;
    let mut new_line = 0usize;
    // Remaining line budget of the open hunk, from its header counts. This
    // disambiguates content lines from markers: a deletion whose text begins
    // with `-- ` must not be mistaken for a `---` file marker.
    let mut old_remaining = 0usize;
    let mut new_remaining = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if old_remaining > 0 || new_remaining > 0 {
            let file = current.as_mut().expect("hunk without file");
            match line.as_bytes().first() {
                Some(b'-') => {
                    if old_remaining == 0 {
                        return Err(Error::Input(format!(
                            "diff line {lineno}: deletion past declared hunk length"
                        )));
                    }
                    file.hunks
                        .last_mut()
                        .expect("hunk open")
                        .deleted_lines
                        .push(old_line);
                    old_line += 1;
                    old_remaining -= 1;
                }
                Some(b'+') => {
                    if new_remaining == 0 {
                        return Err(Error::Input(format!(
                            "diff line {lineno}: insertion past declared hunk length"
                        )));
                    }
                    file.hunks
                        .last_mut()
                        .expect("hunk open")
                        .inserted_lines
                        .push(new_line);
                    new_line += 1;
                    new_remaining -= 1;
                }
                Some(b'\\') => {} // "\ No newline at end of file"
                Some(b' ') | None => {
                    // Context line (some producers emit truly empty lines).
                    old_line += 1;
                    new_line += 1;
                    old_remaining = old_remaining.saturating_sub(1);
                    new_remaining = new_remaining.saturating_sub(1);
                }
                _ => {
                    return Err(Error::Input(format!(
                        "diff line {lineno}: unexpected text inside hunk: `{line}`"
                    )));
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(f) = current.take() {
                files.push(f);
            }
            let (old_guess, new_guess) = split_git_header_paths(rest);
            current = Some(FileDiff {
                old_path: old_guess,
                new_path: new_guess,
                ..FileDiff::default()
            });
            continue;
        }
        let Some(file) = current.as_mut() else {
            // Header noise before the first file (commit metadata etc.).
            continue;
        };
        if let Some(rest) = line.strip_prefix("@@ ") {
            let (os, oc, ns, nc) = parse_hunk_header(rest)
                .ok_or_else(|| Error::Input(format!("bad hunk header at line {lineno}: `{line}`")))?;
            // A zero-count side anchors *after* the stated line; the other
            // side's first touched line is exactly its start.
            old_line = if oc == 0 { os + 1 } else { os };
            new_line = if nc == 0 { ns + 1 } else { ns };
            old_remaining = oc;
            new_remaining = nc;
            file.hunks.push(DiffHunk::default());
            continue;
        }
        if let Some(rest) = line.strip_prefix("rename from ") {
            file.old_path = Some(unquote_path(rest));
        } else if let Some(rest) = line.strip_prefix("rename to ") {
            file.new_path = Some(unquote_path(rest));
        } else if let Some(rest) = line.strip_prefix("--- ") {
            file.old_path = parse_marker_path(rest, "a/");
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            file.new_path = parse_marker_path(rest, "b/");
        } else if line.starts_with("Binary files ") || line == "GIT binary patch" {
            file.is_binary = true;
        } else if line.starts_with("new file mode") {
            file.old_path = None;
        } else if line.starts_with("deleted file mode") {
            file.new_path = None;
        }
    }
    if let Some(f) = current.take() {
        files.push(f);
    }
    Ok(files)
}

/// `-start[,count] +start[,count] @@ ...` without the leading `@@ `.
fn parse_hunk_header(rest: &str) -> Option<(usize, usize, usize, usize)> {
    let mut it = rest.split_whitespace();
    let old = it.next()?.strip_prefix('-')?;
    let new = it.next()?.strip_prefix('+')?;
    let parse_pair = |s: &str| -> Option<(usize, usize)> {
        match s.split_once(',') {
            Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
            None => Some((s.parse().ok()?, 1)),
        }
    };
    let (os, oc) = parse_pair(old)?;
    let (ns, nc) = parse_pair(new)?;
    Some((os, oc, ns, nc))
}

/// Path from a `---`/`+++` marker: handles `/dev/null`, the `a/`/`b/`
/// prefix, C-quoted paths, and the trailing tab git adds for odd names.
fn parse_marker_path(rest: &str, prefix: &str) -> Option<String> {
    let trimmed = rest.trim_end_matches('\t').trim_end();
    if trimmed == "/dev/null" {
        return None;
    }
    let unquoted = unquote_path(trimmed);
    let path = unquoted.strip_prefix(prefix).unwrap_or(&unquoted);
    Some(path.to_string())
}

/// Best-effort split of `a/<old> b/<new>` from the `diff --git` header; the
/// marker lines are authoritative when present.
fn split_git_header_paths(rest: &str) -> (Option<String>, Option<String>) {
    if let Some(pos) = rest.rfind(" b/") {
        let old = rest[..pos].strip_prefix("a/").map(str::to_string);
        let new = Some(rest[pos + 3..].to_string());
        (old, new)
    } else {
        (None, None)
    }
}

/// Undoes git's C-style quoting for paths with special characters.
fn unquote_path(s: &str) -> String {
    let s = s.trim();
    if !(s.len() >= 2 && s.starts_with('"') && s.ends_with('"')) {
        return s.to_string();
    }
    let inner = &s[1..s.len() - 1];
    let bytes = inner.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0usize;
    while i < bytes.len() {
        if bytes[i] == b'\\' && i + 1 < bytes.len() {
            i += 1;
            match bytes[i] {
                b'n' => out.push(b'\n'),
                b't' => out.push(b'\t'),
                b'r' => out.push(b'\r'),
                b'\\' => out.push(b'\\'),
                b'"' => out.push(b'"'),
                b'0'..=b'7' => {
                    let mut val = 0u32;
                    let mut digits = 0;
                    while digits < 3 && i < bytes.len() && (b'0'..=b'7').contains(&bytes[i]) {
                        val = val * 8 + u32::from(bytes[i] - b'0');
                        i += 1;
                        digits += 1;
                    }
                    i -= 1;
                    out.push(val as u8);
                }
                other => out.push(other),
            }
            i += 1;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

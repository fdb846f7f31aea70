//! Method identity and signature normalization.
//!
//! A method is identified by its container path, bare name, and ordered
//! parameter types. Two textual variants of the same method (for example a
//! renamed parameter) normalize to the same [`MethodId`], so their change
//! histories can be merged.
//!
//! Normalization is purely textual: parameter identifiers are stripped and
//! parameter types are kept verbatim in order, with whitespace canonicalized.
//! No type resolution happens, so `List<String>` and `List<java.lang.String>`
//! stay distinct identities. Generic arguments are preserved as written.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

/// Identity of a method: container path, name, and parameter types.
///
/// The canonical rendering is `Container::name(type1, type2)`; nested
/// containers are joined with `::` and constructors carry the simple name of
/// their container. Ordering, equality, and hashing all follow the rendered
/// text byte-for-byte, so collections of ids sort exactly like their
/// rendered forms.
#[derive(Clone)]
pub struct MethodId {
    container: String,
    name: String,
    params: Vec<String>,
    rendered: String,
}

impl MethodId {
    pub fn new(
        container: impl Into<String>,
        name: impl Into<String>,
        params: Vec<String>,
    ) -> MethodId {
        let container = container.into();
        let name = name.into();
        let rendered = render(&container, &name, &params);
        MethodId {
            container,
            name,
            params,
            rendered,
        }
    }

    /// Container path, `::`-joined; empty for a free-standing method.
    pub fn container(&self) -> &str {
        &self.container
    }

    /// Bare method name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Parameter types in declaration order.
    pub fn params(&self) -> &[String] {
        &self.params
    }

    /// Canonical rendering `Container::name(t1, t2)`.
    pub fn rendered(&self) -> &str {
        &self.rendered
    }

    /// Last segment of the container path (`Outer::Inner` gives `Inner`).
    pub fn container_simple_name(&self) -> &str {
        self.container.rsplit("::").next().unwrap_or("")
    }

    /// Parses a canonical rendering back into an id.
    ///
    /// Accepts exactly what [`MethodId::rendered`] produces; parsing is the
    /// inverse of rendering. Parameter identifiers are not stripped here,
    /// use [`normalize_signature`] for raw source signatures.
    pub fn parse(text: &str) -> Result<MethodId> {
        let t = collapse_ws(text.trim());
        let bad = |detail: &str| Error::Normalize {
            signature: text.to_string(),
            detail: detail.to_string(),
        };
        if !t.ends_with(')') {
            return Err(bad("missing parameter list"));
        }
        let open = t.find('(').ok_or_else(|| bad("missing `(`"))?;
        let qual = t[..open].trim_end();
        let inner = &t[open + 1..t.len() - 1];
        let (container, name) = match qual.rfind("::") {
            Some(pos) => (&qual[..pos], &qual[pos + 2..]),
            None => ("", qual),
        };
        if name.is_empty() {
            return Err(bad("empty method name"));
        }
        let params = split_top_level_commas(inner)
            .into_iter()
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        Ok(MethodId::new(container, name, params))
    }
}

impl PartialEq for MethodId {
    fn eq(&self, other: &Self) -> bool {
        self.rendered == other.rendered
    }
}

impl Eq for MethodId {}

impl PartialOrd for MethodId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MethodId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rendered.cmp(&other.rendered)
    }
}

impl Hash for MethodId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rendered.hash(state);
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

impl fmt::Debug for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MethodId({})", self.rendered)
    }
}

fn render(container: &str, name: &str, params: &[String]) -> String {
    let mut out = String::new();
    if !container.is_empty() {
        out.push_str(container);
        out.push_str("::");
    }
    out.push_str(name);
    out.push('(');
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(p);
    }
    out.push(')');
    out
}

/// Normalizes a raw source signature into a [`MethodId`].
///
/// Steps, in order:
///
/// 1. whitespace runs collapse to single spaces
/// 2. `$` in the qualifier becomes `::` (`Outer$Inner::g` and `Outer::Inner::g`
///    are the same container path)
/// 3. a `<init>` name is replaced by the container's simple name
/// 4. per parameter: annotations and `final` are dropped, the trailing
///    identifier is removed, `[ ]` collapses to `[]`, a C-style array suffix
///    on the identifier moves to the type, and a trailing `...` becomes `[]`
///
/// The result renders with a single space after each comma. Normalizing an
/// already-canonical rendering returns the same id.
pub fn normalize_signature(raw: &str) -> Result<MethodId> {
    let t = collapse_ws(raw.trim());
    let bad = |detail: &str| Error::Normalize {
        signature: raw.to_string(),
        detail: detail.to_string(),
    };
    if !t.ends_with(')') {
        return Err(bad("signature does not end with `)`"));
    }

    // Matching `(` of the final `)`, scanning backward so annotation
    // arguments inside the parameter list cannot fool us.
    let mut depth = 0i32;
    let mut open = None;
    for (idx, ch) in t.char_indices().rev() {
        match ch {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    open = Some(idx);
                    break;
                }
            }
            _ => {}
        }
    }
    let open = open.ok_or_else(|| bad("unbalanced parameter parentheses"))?;

    let qual = t[..open].trim_end().replace('$', "::");
    let inner = &t[open + 1..t.len() - 1];
    let (container, mut name) = match qual.rfind("::") {
        Some(pos) => (qual[..pos].to_string(), qual[pos + 2..].to_string()),
        None => (String::new(), qual.clone()),
    };
    if name == "<init>" && !container.is_empty() {
        name = container
            .rsplit("::")
            .next()
            .unwrap_or_default()
            .to_string();
    }
    if name.is_empty() {
        return Err(bad("empty method name"));
    }

    let params: Vec<String> = split_top_level_commas(inner)
        .iter()
        .map(|p| normalize_param(p))
        .filter(|p| !p.is_empty())
        .collect();
    Ok(MethodId::new(container, name, params))
}

/// Splits on commas at bracket depth zero, honoring `()`, `[]`, and `<>`.
pub(crate) fn split_top_level_commas(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    for (idx, ch) in s.char_indices() {
        match ch {
            '(' | '[' | '<' => depth += 1,
            ')' | ']' | '>' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..idx].to_string());
                start = idx + ','.len_utf8();
            }
            _ => {}
        }
    }
    if start < s.len() || !parts.is_empty() {
        parts.push(s[start..].to_string());
    }
    parts.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

pub(crate) fn collapse_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            in_ws = true;
        } else {
            if in_ws && !out.is_empty() {
                out.push(' ');
            }
            in_ws = false;
            out.push(ch);
        }
    }
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

/// `buf[]` or `xs[][]`: an identifier with a bracket suffix. Returns the
/// suffix when the shape matches.
fn identifier_bracket_suffix(s: &str) -> Option<&str> {
    let pos = s.find('[')?;
    let (head, tail) = s.split_at(pos);
    if is_identifier(head) && is_bracket_run(tail) {
        Some(tail)
    } else {
        None
    }
}

fn is_bracket_run(s: &str) -> bool {
    !s.is_empty() && s.len() % 2 == 0 && s.as_bytes().chunks(2).all(|c| c == b"[]")
}

/// Strips the declared identifier from one parameter, leaving the type text.
fn normalize_param(p: &str) -> String {
    let cleaned = strip_annotations_text(p.trim());
    let squared = close_empty_brackets(&cleaned);
    let mut tokens: Vec<String> = split_top_level_spaces(&squared)
        .into_iter()
        .filter(|t| t != "final")
        .collect();

    // The declared name is the last identifier, looking past any detached
    // bracket tokens (`char [] buf` and `int buf []` both shed `buf`).
    let mut idx = tokens.len();
    while idx > 0 && is_bracket_run(&tokens[idx - 1]) {
        idx -= 1;
    }
    if idx > 1 {
        let cand = idx - 1;
        if is_identifier(&tokens[cand]) {
            tokens.remove(cand);
        } else if let Some(suffix) = identifier_bracket_suffix(&tokens[cand]) {
            tokens[cand] = suffix.to_string();
        }
    }

    // Varargs render as an array type.
    let mut varargs = false;
    if let Some(last) = tokens.last_mut() {
        if let Some(stripped) = last.strip_suffix("...") {
            varargs = true;
            if stripped.is_empty() {
                tokens.pop();
            } else {
                *last = stripped.trim_end().to_string();
            }
        }
    }
    if varargs {
        tokens.push("[]".to_string());
    }

    tokens.join(" ")
}

/// Removes `@Name` and `@Name(args)` annotation tokens anywhere in the text.
pub(crate) fn strip_annotations_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(ch) = chars.next() {
        if ch != '@' {
            out.push(ch);
            continue;
        }
        while let Some(&c) = chars.peek() {
            if c.is_alphanumeric() || c == '_' || c == '$' || c == '.' {
                chars.next();
            } else {
                break;
            }
        }
        let mut look = chars.clone();
        while let Some(&c) = look.peek() {
            if c.is_whitespace() {
                look.next();
            } else {
                break;
            }
        }
        if look.peek() == Some(&'(') {
            let mut depth = 0i32;
            for c in look.by_ref() {
                match c {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
            }
            chars = look;
        }
    }
    collapse_ws(out.trim())
}

/// `[ ]` with interior whitespace becomes `[]`; spacing before the bracket
/// is preserved as written.
fn close_empty_brackets(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(ch) = chars.next() {
        if ch == '[' {
            let mut lookahead = chars.clone();
            let mut skipped = 0usize;
            while let Some(&c) = lookahead.peek() {
                if c.is_whitespace() {
                    lookahead.next();
                    skipped += 1;
                } else {
                    break;
                }
            }
            if skipped > 0 && lookahead.peek() == Some(&']') {
                out.push_str("[]");
                lookahead.next();
                chars = lookahead;
                continue;
            }
        }
        out.push(ch);
    }
    out
}

/// Splits on spaces at bracket depth zero so `Map<String, Integer>` stays a
/// single token.
fn split_top_level_spaces(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | '[' | '<' => {
                depth += 1;
                cur.push(ch);
            }
            ')' | ']' | '>' => {
                depth -= 1;
                cur.push(ch);
            }
            ' ' if depth == 0 => {
                if !cur.is_empty() {
                    parts.push(std::mem::take(&mut cur));
                }
            }
            _ => cur.push(ch),
        }
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts
}

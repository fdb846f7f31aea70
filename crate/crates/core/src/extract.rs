//! Method span extraction from source text.
//!
//! A lightweight scanner, not a parser: string and character literals and
//! comments are masked out, then braces are matched while each `{` is
//! classified by the header text in front of it (container declaration,
//! method header, anonymous class, or any other block). The scanner handles
//! brace-delimited languages whose method headers look like
//! `name(parameters)`; the [`LanguageProfile`] supplies the pattern knobs.
//!
//! Spans nest: a method containing an anonymous class yields one span for
//! the outer method covering its whole body plus spans for the inner
//! methods. Anonymous containers are numbered `1, 2, ...` per enclosing
//! container, so a method of the first anonymous class inside `A` renders as
//! `A$1::run()`.

use std::collections::BTreeSet;

use regex::Regex;

use crate::error::{Error, Result};
use crate::method::{collapse_ws, split_top_level_commas};

/// Line-bounded method occurrence in one version of one file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodSpan {
    /// Signature as written: container path, name, typed and named params.
    pub raw_signature: String,
    /// 1-based first line (the header's first line, annotations included).
    pub start_line: usize,
    /// 1-based last line (the closing brace).
    pub end_line: usize,
}

impl MethodSpan {
    pub fn contains(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

/// Scanner configuration for one language family.
#[derive(Clone, Debug)]
pub struct LanguageProfile {
    pub name: String,
    /// Extensions (without dot) of files the miner should visit.
    pub file_extensions: Vec<String>,
    /// Matches a container declaration; capture 1 is the introducing
    /// keyword, capture 2 the container name.
    container_pattern: Regex,
    /// Full-match pattern a method name must satisfy.
    name_pattern: Regex,
    /// Header-leading words that start non-method blocks.
    block_keywords: BTreeSet<String>,
}

impl LanguageProfile {
    pub fn new(
        name: impl Into<String>,
        file_extensions: Vec<String>,
        container_pattern: Regex,
        name_pattern: Regex,
        block_keywords: impl IntoIterator<Item = String>,
    ) -> LanguageProfile {
        LanguageProfile {
            name: name.into(),
            file_extensions,
            container_pattern,
            name_pattern,
            block_keywords: block_keywords.into_iter().collect(),
        }
    }

    /// Profile for Java-shaped source.
    pub fn java() -> LanguageProfile {
        LanguageProfile::new(
            "java",
            vec!["java".to_string()],
            Regex::new(r"(?:^|[^.\w$])(class|interface|enum|record)\s+([A-Za-z_$][\w$]*)")
                .expect("container pattern"),
            Regex::new(r"^[A-Za-z_$][\w$]*$").expect("name pattern"),
            [
                "if", "else", "for", "while", "do", "switch", "case", "default", "try",
                "catch", "finally", "synchronized", "static", "return", "throw", "new",
                "assert", "yield",
            ]
            .into_iter()
            .map(str::to_string),
        )
    }

    /// Looks up a profile by name.
    pub fn by_name(name: &str) -> Result<LanguageProfile> {
        match name.trim().to_ascii_lowercase().as_str() {
            "java" => Ok(LanguageProfile::java()),
            other => Err(Error::Input(format!("unknown language profile `{other}`"))),
        }
    }

    /// Whether a repo-relative path has one of the profile's extensions.
    pub fn matches_path(&self, path: &str) -> bool {
        match path.rsplit('.').next() {
            Some(ext) if ext != path => self
                .file_extensions
                .iter()
                .any(|e| e.eq_ignore_ascii_case(ext)),
            _ => false,
        }
    }
}

enum Frame {
    Container {
        name: String,
        is_enum: bool,
        anon_count: u32,
        open_line: usize,
    },
    Method {
        signature: String,
        start_line: usize,
        open_line: usize,
    },
    Other {
        open_line: usize,
    },
}

impl Frame {
    fn open_line(&self) -> usize {
        match self {
            Frame::Container { open_line, .. }
            | Frame::Method { open_line, .. }
            | Frame::Other { open_line } => *open_line,
        }
    }
}

enum HeaderKind {
    Container { name: String, is_enum: bool },
    Anonymous,
    Method { name: String, params: String },
    Other,
}

/// Extracts every method span from one source text.
///
/// Fails with the offending line when braces are unbalanced after masking;
/// callers mining a history treat that as a per-file skip, not a fatal
/// error. Returned spans are sorted by start line, outer spans before the
/// spans nested in them.
pub fn extract_method_spans(source: &str, profile: &LanguageProfile) -> Result<Vec<MethodSpan>> {
    let stripped = mask_literals_and_comments(source);
    let bytes = stripped.as_slice();

    let mut stack: Vec<Frame> = Vec::new();
    let mut spans: Vec<MethodSpan> = Vec::new();
    let mut line = 1usize;
    let mut header: Option<(usize, usize)> = None; // (byte offset, line)

    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'\n' => line += 1,
            b';' => header = None,
            b'}' => {
                header = None;
                match stack.pop() {
                    Some(Frame::Method {
                        signature,
                        start_line,
                        ..
                    }) => spans.push(MethodSpan {
                        raw_signature: signature,
                        start_line,
                        end_line: line,
                    }),
                    Some(_) => {}
                    None => {
                        return Err(Error::Extraction {
                            line,
                            detail: "unmatched `}`".to_string(),
                        });
                    }
                }
            }
            b'{' => {
                let (text, header_line) = match header {
                    Some((start, hline)) => {
                        (String::from_utf8_lossy(&bytes[start..i]).into_owned(), hline)
                    }
                    None => (String::new(), line),
                };
                let kind = classify_header(&text, &stack, profile);
                let frame = match kind {
                    HeaderKind::Container { name, is_enum } => Frame::Container {
                        name,
                        is_enum,
                        anon_count: 0,
                        open_line: line,
                    },
                    HeaderKind::Anonymous => Frame::Container {
                        name: next_anonymous_name(&mut stack),
                        is_enum: false,
                        anon_count: 0,
                        open_line: line,
                    },
                    HeaderKind::Method { name, params } => Frame::Method {
                        signature: render_raw_signature(&stack, &name, &params),
                        start_line: header_line,
                        open_line: line,
                    },
                    HeaderKind::Other => Frame::Other { open_line: line },
                };
                stack.push(frame);
                header = None;
            }
            _ => {
                if header.is_none() && !b.is_ascii_whitespace() {
                    header = Some((i, line));
                }
            }
        }
    }

    if let Some(frame) = stack.last() {
        return Err(Error::Extraction {
            line: frame.open_line(),
            detail: "unclosed `{`".to_string(),
        });
    }

    spans.sort_by(|a, b| {
        a.start_line
            .cmp(&b.start_line)
            .then(b.end_line.cmp(&a.end_line))
    });
    Ok(spans)
}

/// Numbers an anonymous container within its nearest enclosing container,
/// or globally when there is none.
fn next_anonymous_name(stack: &mut [Frame]) -> String {
    for frame in stack.iter_mut().rev() {
        if let Frame::Container { anon_count, .. } = frame {
            *anon_count += 1;
            return anon_count.to_string();
        }
    }
    "1".to_string()
}

fn render_raw_signature(stack: &[Frame], name: &str, params: &str) -> String {
    let path: Vec<&str> = stack
        .iter()
        .filter_map(|f| match f {
            Frame::Container { name, .. } => Some(name.as_str()),
            _ => None,
        })
        .collect();
    let rendered_params: Vec<String> = split_top_level_commas(params)
        .iter()
        .map(|p| collapse_ws(p.trim()))
        .filter(|p| !p.is_empty())
        .collect();
    let mut out = String::new();
    if !path.is_empty() {
        out.push_str(&path.join("$"));
        out.push_str("::");
    }
    out.push_str(name);
    out.push('(');
    out.push_str(&rendered_params.join(", "));
    out.push(')');
    out
}

fn classify_header(raw: &str, stack: &[Frame], profile: &LanguageProfile) -> HeaderKind {
    let collapsed = collapse_ws(raw.trim());
    if collapsed.is_empty() {
        return HeaderKind::Other;
    }
    // `@interface` declares an annotation container; rewrite before the
    // annotation strip would eat it.
    let collapsed = collapsed.replace("@interface", "interface").replace("@ interface", "interface");
    let h = crate::method::strip_annotations_text(&collapsed);
    if h.is_empty() || h.ends_with("->") || h.ends_with('=') {
        return HeaderKind::Other;
    }

    if let Some(cap) = profile.container_pattern.captures_iter(&h).last() {
        return HeaderKind::Container {
            name: cap[2].to_string(),
            is_enum: &cap[1] == "enum",
        };
    }

    let enum_parent = matches!(
        stack.last(),
        Some(Frame::Container { is_enum: true, .. })
    );

    let Some(close) = h.rfind(')') else {
        // No parameter list. A lone identifier directly inside an enum body
        // is a constant with a class body.
        let lone = is_single_identifier(&h, profile);
        return if lone && enum_parent {
            HeaderKind::Anonymous
        } else {
            HeaderKind::Other
        };
    };

    let trailing = h[close + 1..].trim();
    if !(trailing.is_empty() || trailing == "throws" || trailing.starts_with("throws ")) {
        return HeaderKind::Other;
    }
    let Some(open) = matching_open_paren(&h, close) else {
        return HeaderKind::Other;
    };
    let Some((name, prev)) = identifier_before(&h, open) else {
        return HeaderKind::Other;
    };
    if prev.as_deref() == Some("new") {
        return HeaderKind::Anonymous;
    }
    if profile.block_keywords.contains(&name) || !profile.name_pattern.is_match(&name) {
        return HeaderKind::Other;
    }
    if enum_parent && prev.is_none() && !h.starts_with(&name) {
        // Reachable only with exotic headers; treat as non-method.
        return HeaderKind::Other;
    }
    if enum_parent && prev.is_none() {
        // `NAME(args) {` directly inside an enum body: the enum's own name
        // is a constructor, anything else is a constant with a body.
        let enum_name = match stack.last() {
            Some(Frame::Container { name, .. }) => name.as_str(),
            _ => "",
        };
        if name != enum_name {
            return HeaderKind::Anonymous;
        }
    }
    HeaderKind::Method {
        name,
        params: h[open + 1..close].to_string(),
    }
}

fn is_single_identifier(h: &str, profile: &LanguageProfile) -> bool {
    !h.contains(' ') && profile.name_pattern.is_match(h) && !profile.block_keywords.contains(h)
}

fn matching_open_paren(h: &str, close: usize) -> Option<usize> {
    let bytes = h.as_bytes();
    let mut depth = 0i32;
    for i in (0..=close).rev() {
        match bytes[i] {
            b')' => depth += 1,
            b'(' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

/// Identifier ending right before `pos` (skipping whitespace and one
/// balanced `<...>` group), plus the identifier token before that one.
fn identifier_before(h: &str, pos: usize) -> Option<(String, Option<String>)> {
    let bytes = h.as_bytes();
    let mut i = pos;
    while i > 0 && bytes[i - 1].is_ascii_whitespace() {
        i -= 1;
    }
    if i > 0 && bytes[i - 1] == b'>' {
        let mut depth = 0i32;
        while i > 0 {
            match bytes[i - 1] {
                b'>' => depth += 1,
                b'<' => {
                    depth -= 1;
                    if depth == 0 {
                        i -= 1;
                        break;
                    }
                }
                _ => {}
            }
            i -= 1;
        }
    }
    let end = i;
    while i > 0 && is_ident_byte(bytes[i - 1]) {
        i -= 1;
    }
    if i == end {
        return None;
    }
    let name = String::from_utf8_lossy(&bytes[i..end]).into_owned();
    let mut j = i;
    while j > 0 && bytes[j - 1].is_ascii_whitespace() {
        j -= 1;
    }
    let prev_end = j;
    while j > 0 && is_ident_byte(bytes[j - 1]) {
        j -= 1;
    }
    let prev = if j < prev_end {
        Some(String::from_utf8_lossy(&bytes[j..prev_end]).into_owned())
    } else {
        None
    };
    Some((name, prev))
}

/// Replaces comments and string/char literal contents with spaces, keeping
/// every newline so byte offsets and line numbers survive.
fn mask_literals_and_comments(src: &str) -> Vec<u8> {
    enum S {
        Code,
        Line,
        Block,
        Str,
        TextBlock,
        Ch,
    }
    let b = src.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mask = |out: &mut Vec<u8>, byte: u8| {
        out.push(if byte == b'\n' { b'\n' } else { b' ' });
    };
    let mut s = S::Code;
    let mut i = 0usize;
    while i < b.len() {
        let c = b[i];
        match s {
            S::Code => {
                if c == b'/' && i + 1 < b.len() && b[i + 1] == b'/' {
                    s = S::Line;
                    out.extend([b' ', b' ']);
                    i += 2;
                } else if c == b'/' && i + 1 < b.len() && b[i + 1] == b'*' {
                    s = S::Block;
                    out.extend([b' ', b' ']);
                    i += 2;
                } else if c == b'"' && i + 2 < b.len() && b[i + 1] == b'"' && b[i + 2] == b'"' {
                    s = S::TextBlock;
                    out.extend([b' ', b' ', b' ']);
                    i += 3;
                } else if c == b'"' {
                    s = S::Str;
                    out.push(b' ');
                    i += 1;
                } else if c == b'\'' {
                    s = S::Ch;
                    out.push(b' ');
                    i += 1;
                } else {
                    out.push(c);
                    i += 1;
                }
            }
            S::Line => {
                if c == b'\n' {
                    s = S::Code;
                }
                mask(&mut out, c);
                i += 1;
            }
            S::Block => {
                if c == b'*' && i + 1 < b.len() && b[i + 1] == b'/' {
                    s = S::Code;
                    out.extend([b' ', b' ']);
                    i += 2;
                } else {
                    mask(&mut out, c);
                    i += 1;
                }
            }
            S::Str => {
                if c == b'\\' && i + 1 < b.len() {
                    mask(&mut out, c);
                    mask(&mut out, b[i + 1]);
                    i += 2;
                } else {
                    if c == b'"' || c == b'\n' {
                        s = S::Code;
                    }
                    mask(&mut out, c);
                    i += 1;
                }
            }
            S::TextBlock => {
                if c == b'"' && i + 2 < b.len() && b[i + 1] == b'"' && b[i + 2] == b'"' {
                    s = S::Code;
                    out.extend([b' ', b' ', b' ']);
                    i += 3;
                } else if c == b'\\' && i + 1 < b.len() {
                    mask(&mut out, c);
                    mask(&mut out, b[i + 1]);
                    i += 2;
                } else {
                    mask(&mut out, c);
                    i += 1;
                }
            }
            S::Ch => {
                if c == b'\\' && i + 1 < b.len() {
                    mask(&mut out, c);
                    mask(&mut out, b[i + 1]);
                    i += 2;
                } else {
                    if c == b'\'' || c == b'\n' {
                        s = S::Code;
                    }
                    mask(&mut out, c);
                    i += 1;
                }
            }
        }
    }
    out
}

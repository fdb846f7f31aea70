//! Static call graphs: parsing, normalization, and dependency closure.
//!
//! Two input grammars are accepted. The java-callgraph dump uses
//! `M:<caller> (X)<callee>` lines, where X marks the invocation kind and
//! `C:` class-level records are skipped. The interchange form is a
//! tab-separated edge list `caller<TAB>callee`, where a line with no tab
//! declares an isolated node, and `#` starts a comment. Node names written
//! as `Class:method(args)` are rewritten to `Class::method(args)`, `<init>`
//! becomes the container's simple name, and `$` separators become `::`; all
//! ids then pass through signature normalization so they join with ledger
//! keys.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::method::{normalize_signature, MethodId};

/// Invocation kind markers of the java-callgraph dump format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CallKind {
    /// `(M)` virtual dispatch.
    Virtual,
    /// `(I)` interface dispatch.
    Interface,
    /// `(O)` special dispatch (constructors, super, private).
    Special,
    /// `(S)` static dispatch.
    Static,
    /// `(D)` dynamic dispatch (lambdas, method references).
    Dynamic,
}

impl CallKind {
    pub const ALL: [CallKind; 5] = [
        CallKind::Virtual,
        CallKind::Interface,
        CallKind::Special,
        CallKind::Static,
        CallKind::Dynamic,
    ];

    pub fn letter(self) -> char {
        match self {
            CallKind::Virtual => 'M',
            CallKind::Interface => 'I',
            CallKind::Special => 'O',
            CallKind::Static => 'S',
            CallKind::Dynamic => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<CallKind> {
        match c {
            'M' => Some(CallKind::Virtual),
            'I' => Some(CallKind::Interface),
            'O' => Some(CallKind::Special),
            'S' => Some(CallKind::Static),
            'D' => Some(CallKind::Dynamic),
            _ => None,
        }
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Directed call graph over method identities. Duplicate edges collapse;
/// self-loops are allowed; every edge endpoint is a node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CallGraph {
    nodes: BTreeSet<MethodId>,
    out: BTreeMap<MethodId, BTreeSet<MethodId>>,
}

impl CallGraph {
    pub fn new() -> CallGraph {
        CallGraph::default()
    }

    pub fn add_node(&mut self, id: MethodId) {
        self.nodes.insert(id);
    }

    pub fn add_edge(&mut self, caller: MethodId, callee: MethodId) {
        self.nodes.insert(caller.clone());
        self.nodes.insert(callee.clone());
        self.out.entry(caller).or_default().insert(callee);
    }

    pub fn contains(&self, id: &MethodId) -> bool {
        self.nodes.contains(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeSet::len).sum()
    }

    /// Nodes in lexicographic order of their rendered ids.
    pub fn nodes(&self) -> impl Iterator<Item = &MethodId> {
        self.nodes.iter()
    }

    /// Callees of `id` in lexicographic order; empty if none.
    pub fn callees<'a>(&'a self, id: &MethodId) -> impl Iterator<Item = &'a MethodId> + 'a {
        self.out.get(id).into_iter().flatten()
    }

    /// All edges, sorted by (caller, callee).
    pub fn edges(&self) -> impl Iterator<Item = (&MethodId, &MethodId)> {
        self.out
            .iter()
            .flat_map(|(caller, callees)| callees.iter().map(move |c| (caller, c)))
    }
}

/// A test method together with every method it can reach, itself first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencySet {
    pub test: MethodId,
    /// First-visit order of the traversal; begins with `test`.
    pub methods: Vec<MethodId>,
}

/// Converts one graph node name to a method identity, accepting both the
/// `Class:method(args)` dump form and the canonical `Class::method(args)`.
fn parse_graph_node(text: &str) -> Result<MethodId> {
    let trimmed = text.trim();
    let paren = trimmed.find('(').unwrap_or(trimmed.len());
    let qualifier = &trimmed[..paren];
    let canonical = if qualifier.contains("::") {
        trimmed.to_string()
    } else if let Some(pos) = qualifier.rfind(':') {
        format!("{}::{}", &trimmed[..pos], &trimmed[pos + 1..])
    } else {
        trimmed.to_string()
    };
    normalize_signature(&canonical)
}

/// Parses a java-callgraph method-level dump. `kinds` filters edges by
/// invocation kind; `None` keeps every kind.
pub fn parse_java_callgraph(text: &str, kinds: Option<&BTreeSet<CallKind>>) -> Result<CallGraph> {
    let mut graph = CallGraph::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end();
        let Some(rest) = line.strip_prefix("M:") else {
            // Class-level `C:` records and any other noise are skipped.
            continue;
        };
        let (caller_text, kind, callee_text) =
            split_dump_edge(rest).ok_or_else(|| Error::GraphParse {
                line: lineno,
                detail: format!("malformed method record `{line}`"),
            })?;
        if let Some(keep) = kinds {
            if !keep.contains(&kind) {
                continue;
            }
        }
        let caller = parse_graph_node(caller_text).map_err(|e| Error::GraphParse {
            line: lineno,
            detail: e.to_string(),
        })?;
        let callee = parse_graph_node(callee_text).map_err(|e| Error::GraphParse {
            line: lineno,
            detail: e.to_string(),
        })?;
        graph.add_edge(caller, callee);
    }
    Ok(graph)
}

/// Splits `<caller> (X)<callee>` at the first ` (X)` whose X is a known
/// kind letter.
fn split_dump_edge(rest: &str) -> Option<(&str, CallKind, &str)> {
    let bytes = rest.as_bytes();
    for i in 0..bytes.len().saturating_sub(3) {
        if bytes[i] == b' ' && bytes[i + 1] == b'(' && bytes[i + 3] == b')' {
            if let Some(kind) = CallKind::from_letter(bytes[i + 2] as char) {
                let caller = rest[..i].trim();
                let callee = rest[i + 4..].trim();
                if !caller.is_empty() && !callee.is_empty() {
                    return Some((caller, kind, callee));
                }
            }
        }
    }
    None
}

/// Parses the tab-separated interchange form. Lines: `caller<TAB>callee`
/// for an edge, a single field for an isolated node, `#` comments and blank
/// lines skipped.
pub fn parse_edge_list(text: &str) -> Result<CallGraph> {
    let mut graph = CallGraph::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t').map(str::trim).filter(|f| !f.is_empty());
        let first = fields.next().ok_or_else(|| Error::GraphParse {
            line: lineno,
            detail: "empty record".to_string(),
        })?;
        let second = fields.next();
        if fields.next().is_some() {
            return Err(Error::GraphParse {
                line: lineno,
                detail: "more than two fields".to_string(),
            });
        }
        let first = parse_graph_node(first).map_err(|e| Error::GraphParse {
            line: lineno,
            detail: e.to_string(),
        })?;
        match second {
            Some(callee_text) => {
                let callee = parse_graph_node(callee_text).map_err(|e| Error::GraphParse {
                    line: lineno,
                    detail: e.to_string(),
                })?;
                graph.add_edge(first, callee);
            }
            None => graph.add_node(first),
        }
    }
    Ok(graph)
}

/// Re-normalizes every node id and re-keys edges consistently. Applying it
/// to an already-normalized graph changes nothing.
pub fn normalize_graph(graph: &CallGraph) -> Result<CallGraph> {
    let mut out = CallGraph::new();
    for node in graph.nodes() {
        out.add_node(normalize_signature(node.rendered())?);
    }
    for (caller, callee) in graph.edges() {
        out.add_edge(
            normalize_signature(caller.rendered())?,
            normalize_signature(callee.rendered())?,
        );
    }
    Ok(out)
}

/// Renders the graph as the tab-separated interchange form: edges sorted by
/// (caller, callee), then isolated nodes as single-field lines.
pub fn write_edge_list(graph: &CallGraph) -> String {
    let mut text = String::new();
    let mut connected: BTreeSet<&MethodId> = BTreeSet::new();
    for (caller, callee) in graph.edges() {
        text.push_str(caller.rendered());
        text.push('\t');
        text.push_str(callee.rendered());
        text.push('\n');
        connected.insert(caller);
        connected.insert(callee);
    }
    for node in graph.nodes() {
        if !connected.contains(node) {
            text.push_str(node.rendered());
            text.push('\n');
        }
    }
    text
}

/// Depth-first closure from `test`: every reachable node, visited once, the
/// test itself first, out-edges explored in lexicographic callee order.
pub fn dependencies(graph: &CallGraph, test: &MethodId) -> Result<DependencySet> {
    if !graph.contains(test) {
        return Err(Error::UnknownTest(test.rendered().to_string()));
    }
    let mut visited: BTreeSet<&MethodId> = BTreeSet::new();
    let mut order: Vec<MethodId> = Vec::new();
    let mut stack: Vec<&MethodId> = vec![test];
    while let Some(current) = stack.pop() {
        if !visited.insert(current) {
            continue;
        }
        order.push(current.clone());
        let callees: Vec<&MethodId> = graph.callees(current).collect();
        for callee in callees.into_iter().rev() {
            if !visited.contains(callee) {
                stack.push(callee);
            }
        }
    }
    Ok(DependencySet {
        test: test.clone(),
        methods: order,
    })
}

/// How test roots are picked out of a graph.
#[derive(Clone, Debug)]
pub enum RootSelector {
    /// Glob over rendered ids; `*` matches any run, `?` one character.
    Glob(String),
    /// Explicit rendered ids, typically read from a roots file.
    Explicit(Vec<String>),
}

/// Roots found in the graph plus warnings for explicit ids that were not.
#[derive(Clone, Debug, Default)]
pub struct RootSelection {
    pub roots: Vec<MethodId>,
    pub warnings: Vec<String>,
}

/// Picks test roots; the result is sorted and deduplicated.
pub fn identify_test_roots(graph: &CallGraph, selector: &RootSelector) -> Result<RootSelection> {
    let mut selection = RootSelection::default();
    match selector {
        RootSelector::Glob(pattern) => {
            for node in graph.nodes() {
                if glob_match(pattern, node.rendered()) {
                    selection.roots.push(node.clone());
                }
            }
        }
        RootSelector::Explicit(ids) => {
            let mut seen = BTreeSet::new();
            for raw in ids {
                let id = parse_graph_node(raw)?;
                if !seen.insert(id.clone()) {
                    continue;
                }
                if graph.contains(&id) {
                    selection.roots.push(id);
                } else {
                    selection
                        .warnings
                        .push(format!("test id `{}` not in call graph; skipped", id));
                }
            }
            selection.roots.sort();
        }
    }
    Ok(selection)
}

/// Glob with `*` and `?`, matched over bytes with standard backtracking.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p = pattern.as_bytes();
    let t = text.as_bytes();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == b'?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == b'*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == b'*' {
        pi += 1;
    }
    pi == p.len()
}

//! Configuration resolution: command-line flags, environment, and an
//! optional key=value file, in that precedence order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use churnmin_core::cp::CpMetric;
use churnmin_core::graph::{CallKind, RootSelector};
use churnmin_core::score::Measure;

use crate::{AppError, AppResult};

/// Environment variable naming the default output directory.
pub const ENV_OUT: &str = "CHURNMIN_OUT";
/// Environment variable naming the default parallelism degree.
pub const ENV_JOBS: &str = "CHURNMIN_JOBS";

/// Parsed key=value configuration file. Keys use the long flag names;
/// `#` starts a comment; unknown keys are rejected.
#[derive(Debug)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
    pub path: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "repo",
    "end-commit",
    "jobs",
    "language",
    "ledger",
    "graph",
    "graph-format",
    "tests",
    "tests-file",
    "call-kinds",
    "strip-package-prefix",
    "metric",
    "measure",
    "budget",
    "ground-truth",
    "out",
];

impl FileConfig {
    pub fn empty() -> FileConfig {
        FileConfig {
            values: BTreeMap::new(),
            path: None,
        }
    }

    pub fn load(path: Option<&Path>) -> AppResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::empty());
        };
        let text = fs::read_to_string(path).map_err(|e| {
            AppError::Input(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(AppError::Usage(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(AppError::Usage(format!(
                    "{}:{}: unknown config key `{key}`",
                    path.display(),
                    lineno + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig {
            values,
            path: Some(path.to_path_buf()),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path_value(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn string_value(&self, key: &str) -> Option<String> {
        self.get(key).map(str::to_string)
    }
}

/// Flags, then environment, then config file.
fn pick<T>(flag: Option<T>, env: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(env).or(file)
}

fn require<T>(value: Option<T>, what: &str) -> AppResult<T> {
    value.ok_or_else(|| AppError::Usage(format!("{what} is required (flag or config file)")))
}

pub fn resolve_out(flag: Option<PathBuf>, file: &FileConfig) -> AppResult<PathBuf> {
    let env = std::env::var_os(ENV_OUT).map(PathBuf::from);
    require(
        pick(flag, env, file.path_value("out")),
        "--out output directory",
    )
}

pub fn resolve_jobs(flag: Option<usize>, file: &FileConfig) -> AppResult<usize> {
    let env = match std::env::var(ENV_JOBS) {
        Ok(text) => Some(text.parse::<usize>().map_err(|_| {
            AppError::Usage(format!("{ENV_JOBS} must be an integer, got `{text}`"))
        })?),
        Err(_) => None,
    };
    let file_value = match file.string_value("jobs") {
        Some(text) => Some(text.parse::<usize>().map_err(|_| {
            AppError::Usage(format!("config key jobs must be an integer, got `{text}`"))
        })?),
        None => None,
    };
    Ok(pick(flag, env, file_value).unwrap_or(1).max(1))
}

pub fn resolve_ledger(flag: Option<PathBuf>, file: &FileConfig) -> AppResult<PathBuf> {
    require(pick(flag, None, file.path_value("ledger")), "--ledger")
}

pub fn resolve_repo(
    repo: Option<PathBuf>,
    end_commit: Option<String>,
    language: Option<String>,
    file: &FileConfig,
) -> AppResult<(PathBuf, String, String)> {
    let repo = require(pick(repo, None, file.path_value("repo")), "--repo")?;
    let end = pick(end_commit, None, file.string_value("end-commit"))
        .unwrap_or_else(|| "HEAD".to_string());
    let language = pick(language, None, file.string_value("language"))
        .unwrap_or_else(|| "java".to_string());
    Ok((repo, end, language))
}

/// Graph input format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Callgraph,
    Tsv,
}

impl FromStr for GraphFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<GraphFormat, String> {
        match s {
            "callgraph" => Ok(GraphFormat::Callgraph),
            "tsv" => Ok(GraphFormat::Tsv),
            other => Err(format!(
                "unknown graph format `{other}` (expected callgraph or tsv)"
            )),
        }
    }
}

pub struct GraphSpec {
    pub path: PathBuf,
    pub format: GraphFormat,
    pub call_kinds: Option<BTreeSet<CallKind>>,
    pub strip_package_prefix: bool,
    pub selector: RootSelector,
    /// Original roots file, when the selector came from one.
    pub tests_file: Option<PathBuf>,
}

#[allow(clippy::too_many_arguments)]
pub fn resolve_graph(
    graph: Option<PathBuf>,
    format: Option<GraphFormat>,
    call_kinds: Option<String>,
    strip: bool,
    tests: Option<String>,
    tests_file: Option<PathBuf>,
    file: &FileConfig,
) -> AppResult<GraphSpec> {
    let path = require(pick(graph, None, file.path_value("graph")), "--graph")?;
    let format = match format {
        Some(parsed) => parsed,
        None => match file.string_value("graph-format") {
            Some(text) => text.parse::<GraphFormat>().map_err(AppError::Usage)?,
            None => GraphFormat::Callgraph,
        },
    };
    let kinds_text = pick(call_kinds, None, file.string_value("call-kinds"));
    let call_kinds = match kinds_text {
        None => None,
        Some(letters) => {
            let mut kinds = BTreeSet::new();
            for letter in letters.chars() {
                let kind = CallKind::from_letter(letter).ok_or_else(|| {
                    AppError::Usage(format!(
                        "unknown call kind `{letter}` in --call-kinds (expected from MIOSD)"
                    ))
                })?;
                kinds.insert(kind);
            }
            if kinds.is_empty() {
                return Err(AppError::Usage("--call-kinds must not be empty".into()));
            }
            Some(kinds)
        }
    };
    let strip = strip
        || matches!(
            file.string_value("strip-package-prefix").as_deref(),
            Some("true") | Some("1")
        );
    let tests = pick(tests, None, file.string_value("tests"));
    let tests_file = pick(tests_file, None, file.path_value("tests-file"));
    let selector = match (&tests, &tests_file) {
        (Some(_), Some(_)) => {
            return Err(AppError::Usage(
                "--tests and --tests-file are mutually exclusive".into(),
            ))
        }
        (Some(glob), None) => RootSelector::Glob(glob.clone()),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| {
                AppError::Input(format!("cannot read tests file {}: {e}", path.display()))
            })?;
            let ids: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect();
            if ids.is_empty() {
                return Err(AppError::Usage(format!(
                    "tests file {} lists no test ids",
                    path.display()
                )));
            }
            RootSelector::Explicit(ids)
        }
        (None, None) => {
            return Err(AppError::Usage(
                "one of --tests or --tests-file is required".into(),
            ))
        }
    };
    Ok(GraphSpec {
        path,
        format,
        call_kinds,
        strip_package_prefix: strip,
        selector,
        tests_file,
    })
}

pub fn resolve_metrics(flag: Vec<String>, file: &FileConfig) -> AppResult<Vec<CpMetric>> {
    if !flag.is_empty() {
        return parse_list(&flag.join(","), "--metric");
    }
    match file.string_value("metric") {
        Some(text) => parse_list(&text, "config key metric"),
        None => Ok(CpMetric::ALL.to_vec()),
    }
}

pub fn resolve_measures(flag: Vec<String>, file: &FileConfig) -> AppResult<Vec<Measure>> {
    if !flag.is_empty() {
        return parse_list(&flag.join(","), "--measure");
    }
    match file.string_value("measure") {
        Some(text) => parse_list(&text, "config key measure"),
        None => Ok(Measure::ALL.to_vec()),
    }
}

pub fn resolve_budgets(flag: Vec<String>, file: &FileConfig) -> AppResult<Vec<f64>> {
    let texts: Vec<String> = if !flag.is_empty() {
        flag
    } else {
        match file.string_value("budget") {
            Some(text) => text.split(',').map(str::to_string).collect(),
            None => vec!["0.25".into(), "0.5".into(), "0.75".into()],
        }
    };
    let mut budgets = Vec::new();
    for text in texts {
        let budget = parse_budget(text.trim())?;
        if !budgets.contains(&budget) {
            budgets.push(budget);
        }
    }
    Ok(budgets)
}

/// Accepts a fraction (`0.5`) or a percentage (`50%`), both in (0, 1].
pub fn parse_budget(text: &str) -> AppResult<f64> {
    let (number, scale) = match text.strip_suffix('%') {
        Some(percent) => (percent, 100.0),
        None => (text, 1.0),
    };
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| AppError::Usage(format!("budget `{text}` is not a number")))?;
    let budget = value / scale;
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(AppError::Usage(format!(
            "budget `{text}` is outside (0, 1]"
        )));
    }
    Ok(budget)
}

fn parse_list<T>(text: &str, what: &str) -> AppResult<Vec<T>>
where
    T: FromStr + PartialEq,
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for part in text.split(',') {
        let item = part
            .trim()
            .parse::<T>()
            .map_err(|e| AppError::Usage(format!("{what}: {e}")))?;
        if !out.contains(&item) {
            out.push(item);
        }
    }
    if out.is_empty() {
        return Err(AppError::Usage(format!("{what} lists nothing")));
    }
    Ok(out)
}

/// `label=path` argument form.
pub fn parse_labeled_path(text: &str) -> Result<(String, PathBuf), String> {
    match text.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => {
            Ok((label.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected LABEL=PATH, got `{text}`")),
    }
}

/// `a,b` comparison pair.
pub fn parse_compare_pair(text: &str) -> Result<(String, String), String> {
    match text.split_once(',') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
            Ok((a.trim().to_string(), b.trim().to_string()))
        }
        _ => Err(format!("expected LABEL,LABEL, got `{text}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(lines: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("churnmin.conf");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn file_values_fill_missing_flags() {
        let (_dir, path) = write_config("repo = /tmp/r\nend-commit = abc\n# comment\n");
        let file = FileConfig::load(Some(&path)).unwrap();
        let (repo, end, language) = resolve_repo(None, None, None, &file).unwrap();
        assert_eq!(repo, PathBuf::from("/tmp/r"));
        assert_eq!(end, "abc");
        assert_eq!(language, "java");
    }

    #[test]
    fn flags_beat_file_values() {
        let (_dir, path) = write_config("repo = /tmp/file\n");
        let file = FileConfig::load(Some(&path)).unwrap();
        let (repo, _, _) =
            resolve_repo(Some(PathBuf::from("/tmp/flag")), None, None, &file).unwrap();
        assert_eq!(repo, PathBuf::from("/tmp/flag"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let (_dir, path) = write_config("metrci = chgfreq\n");
        let err = FileConfig::load(Some(&path)).unwrap_err();
        assert!(matches!(err, AppError::Usage(_)));
    }

    #[test]
    fn budget_parsing_accepts_fractions_and_percents() {
        assert_eq!(parse_budget("0.5").unwrap(), 0.5);
        assert_eq!(parse_budget("50%").unwrap(), 0.5);
        assert_eq!(parse_budget("1").unwrap(), 1.0);
        assert!(parse_budget("0").is_err());
        assert!(parse_budget("1.5").is_err());
        assert!(parse_budget("-0.2").is_err());
        assert!(parse_budget("all").is_err());
    }

    #[test]
    fn default_budget_grid_is_quartiles() {
        let budgets = resolve_budgets(vec![], &FileConfig::empty()).unwrap();
        assert_eq!(budgets, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn labeled_path_and_compare_parsers() {
        assert_eq!(
            parse_labeled_path("mine=out/suite.txt").unwrap(),
            ("mine".to_string(), PathBuf::from("out/suite.txt"))
        );
        assert!(parse_labeled_path("nopath").is_err());
        assert_eq!(
            parse_compare_pair("a,b").unwrap(),
            ("a".to_string(), "b".to_string())
        );
        assert!(parse_compare_pair("a").is_err());
    }
}

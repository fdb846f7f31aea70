//! Command implementations shared by the subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use churnmin_core::cp::{cp_table, write_cp_csv, CpMetric, CpTable};
use churnmin_core::eval::{
    compare, evaluate, read_external_outcomes, read_ground_truth, render_report, report_rows,
    write_summary_csv, Comparison, EvaluationReport, OutcomeRow, SummaryRow,
};
use churnmin_core::extract::LanguageProfile;
use churnmin_core::graph::{
    dependencies, identify_test_roots, normalize_graph, parse_edge_list, parse_java_callgraph,
    write_edge_list, CallGraph, DependencySet, RootSelector,
};
use churnmin_core::ledger::{aggregate, read_ledger_csv, write_ledger_csv, MethodLedger};
use churnmin_core::mine::mine;
use churnmin_core::score::{
    read_suite, score_tests, select, write_ranking_csv, write_suite, Measure, TestScore,
};
use churnmin_core::MethodId;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{GraphFormat, GraphSpec};
use crate::{AppError, AppResult};

/// Wall-clock bookkeeping for timings.csv.
pub struct StageClock {
    started: Instant,
    stages: Vec<(&'static str, f64)>,
}

impl StageClock {
    pub fn new() -> StageClock {
        StageClock {
            started: Instant::now(),
            stages: Vec::new(),
        }
    }

    pub fn stage<T>(
        &mut self,
        name: &'static str,
        body: impl FnOnce() -> AppResult<T>,
    ) -> AppResult<T> {
        let start = Instant::now();
        let out = body()?;
        self.stages.push((name, start.elapsed().as_secs_f64()));
        Ok(out)
    }

    /// Start of the whole run, for elapsed-time reporting mid-run.
    pub fn run_started(&self) -> Instant {
        self.started
    }

    /// Writes timings.csv, appending the run total.
    pub fn finish(self, out_dir: &Path) -> AppResult<()> {
        let total = self.started.elapsed().as_secs_f64();
        let mut text = String::from("stage,seconds\n");
        for (name, seconds) in &self.stages {
            text.push_str(&format!("{name},{seconds:.3}\n"));
        }
        text.push_str(&format!("total,{total:.3}\n"));
        fs::write(out_dir.join("timings.csv"), text)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    commit: Option<String>,
}

/// Reproduction record: resolved configuration plus input digests.
/// Deliberately free of wall-clock data.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: BTreeMap<String, String>,
    inputs: BTreeMap<String, InputRecord>,
    outputs: Vec<String>,
}

struct ManifestBuilder {
    command: &'static str,
    config: BTreeMap<String, String>,
    inputs: BTreeMap<String, InputRecord>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    fn new(command: &'static str) -> ManifestBuilder {
        ManifestBuilder {
            command,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    fn input_file(&mut self, name: &str, path: &Path) -> AppResult<&mut Self> {
        self.inputs.insert(
            name.to_string(),
            InputRecord {
                path: path.display().to_string(),
                sha256: Some(sha256_file(path)?),
                commit: None,
            },
        );
        Ok(self)
    }

    fn input_repo(&mut self, path: &Path, commit: &str) -> &mut Self {
        self.inputs.insert(
            "repo".to_string(),
            InputRecord {
                path: path.display().to_string(),
                sha256: None,
                commit: Some(commit.to_string()),
            },
        );
        self
    }

    fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    fn write(mut self, out_dir: &Path) -> AppResult<()> {
        self.outputs.push("timings.csv".to_string());
        self.outputs.push("run-manifest.json".to_string());
        self.outputs.sort();
        self.outputs.dedup();
        let manifest = RunManifest {
            tool: "churnmin",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| AppError::Data(format!("cannot serialize run manifest: {e}")))?;
        fs::write(out_dir.join("run-manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn sha256_file(path: &Path) -> AppResult<String> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn open_input(path: &Path) -> AppResult<File> {
    File::open(path).map_err(|e| AppError::Input(format!("cannot open {}: {e}", path.display())))
}

fn create_output(out_dir: &Path, name: &str) -> AppResult<BufWriter<File>> {
    let path = out_dir.join(name);
    let file = File::create(&path)
        .map_err(|e| AppError::Input(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Inputs must never be overwritten: refuse when an input file sits in
/// the output directory under a name this run will write.
fn guard_outputs(out_dir: &Path, planned: &[String], inputs: &[&Path]) -> AppResult<()> {
    let out_dir = match fs::canonicalize(out_dir) {
        Ok(dir) => dir,
        Err(_) => return Ok(()),
    };
    for input in inputs {
        let Ok(canonical) = fs::canonicalize(input) else {
            continue;
        };
        let (Some(parent), Some(name)) = (canonical.parent(), canonical.file_name()) else {
            continue;
        };
        let name = name.to_string_lossy();
        if parent == out_dir
            && (planned.iter().any(|p| p.as_str() == name)
                || name == "timings.csv"
                || name == "run-manifest.json")
        {
            return Err(AppError::Usage(format!(
                "input {} would be overwritten by outputs in {}",
                input.display(),
                out_dir.display()
            )));
        }
    }
    Ok(())
}

fn profile_for(language: &str) -> AppResult<LanguageProfile> {
    LanguageProfile::by_name(language)
        .map_err(|_| AppError::Usage(format!("unknown language profile `{language}`")))
}

fn budget_tag(budget: f64) -> String {
    let text = format!("{:.4}", budget * 100.0);
    text.trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

/// `chgfreq-avg-b50` style configuration label.
pub fn config_label(metric: CpMetric, measure: Measure, budget: Option<f64>) -> String {
    match budget {
        Some(b) => format!("{metric}-{measure}-b{}", budget_tag(b)),
        None => format!("{metric}-{measure}"),
    }
}

fn ranking_name(metric: CpMetric, measure: Measure) -> String {
    format!("ranking_{metric}_{measure}.csv")
}

fn suite_name(metric: CpMetric, measure: Measure, budget: f64) -> String {
    format!("suite_{metric}_{measure}_b{}.txt", budget_tag(budget))
}

/// Graph loading, package stripping, normalization, root selection,
/// and dependency closure. Each dependency set carries its test root.
pub struct GraphStage {
    pub graph: CallGraph,
    pub deps: Vec<DependencySet>,
}

pub fn load_graph(spec: &GraphSpec) -> AppResult<GraphStage> {
    let text = fs::read_to_string(&spec.path)
        .map_err(|e| AppError::Input(format!("cannot read {}: {e}", spec.path.display())))?;
    let parsed = match spec.format {
        GraphFormat::Callgraph => parse_java_callgraph(&text, spec.call_kinds.as_ref())?,
        GraphFormat::Tsv => parse_edge_list(&text)?,
    };
    let parsed = if spec.strip_package_prefix {
        strip_packages(&parsed)
    } else {
        parsed
    };
    let graph = normalize_graph(&parsed)?;
    let selection = identify_test_roots(&graph, &spec.selector)?;
    for warning in &selection.warnings {
        log::warn!("{warning}");
    }
    if selection.roots.is_empty() {
        return Err(AppError::Data(
            "no test roots matched the selector".to_string(),
        ));
    }
    let mut deps = Vec::with_capacity(selection.roots.len());
    for root in &selection.roots {
        deps.push(dependencies(&graph, root)?);
    }
    Ok(GraphStage { graph, deps })
}

/// Reduces every dotted identifier chain to its last segment, so
/// `org.apache.LocaleUtils` becomes `LocaleUtils` and
/// `java.util.List<java.lang.String>` becomes `List<String>`. Distinct
/// classes sharing a simple name will merge; opting in means accepting
/// that.
fn strip_dotted(text: &str) -> String {
    fn flush(out: &mut String, word: &str) {
        if word.is_empty() {
            return;
        }
        out.push_str(word.rsplit('.').find(|s| !s.is_empty()).unwrap_or(word));
    }
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' || c == '$' || c == '.' {
            word.push(c);
        } else {
            flush(&mut out, &word);
            word.clear();
            out.push(c);
        }
    }
    flush(&mut out, &word);
    out
}

fn strip_packages(graph: &CallGraph) -> CallGraph {
    fn strip_id(id: &MethodId) -> MethodId {
        let container = strip_dotted(id.container());
        let params = id.params().iter().map(|p| strip_dotted(p)).collect();
        MethodId::new(container, id.name(), params)
    }
    let mut out = CallGraph::new();
    for node in graph.nodes() {
        out.add_node(strip_id(node));
    }
    for (from, to) in graph.edges() {
        out.add_edge(strip_id(from), strip_id(to));
    }
    out
}

fn load_ledger(path: &Path) -> AppResult<MethodLedger> {
    let raw = read_ledger_csv(open_input(path)?)?;
    Ok(aggregate(&raw)?)
}

/// One scored configuration with its full ranking.
pub struct ScoredConfig {
    pub metric: CpMetric,
    pub measure: Measure,
    pub ranking: Vec<TestScore>,
}

fn score_all(
    ledger: &MethodLedger,
    deps: &[DependencySet],
    metrics: &[CpMetric],
    measures: &[Measure],
) -> AppResult<(Vec<CpTable>, Vec<ScoredConfig>)> {
    let mut tables = Vec::new();
    let mut configs = Vec::new();
    for &metric in metrics {
        let table = cp_table(ledger, metric)?;
        for &measure in measures {
            let ranking = score_tests(&table, deps, measure)?;
            configs.push(ScoredConfig {
                metric,
                measure,
                ranking,
            });
        }
        tables.push(table);
    }
    Ok((tables, configs))
}

fn write_cp_tables(out_dir: &Path, tables: &[CpTable]) -> AppResult<()> {
    for table in tables {
        let name = format!("cp_{}.csv", table.metric);
        write_cp_csv(create_output(out_dir, &name)?, table)?;
    }
    Ok(())
}

fn write_rankings(out_dir: &Path, configs: &[ScoredConfig]) -> AppResult<()> {
    for config in configs {
        write_ranking_csv(
            create_output(out_dir, &ranking_name(config.metric, config.measure))?,
            &config.ranking,
        )?;
    }
    Ok(())
}

pub fn cmd_mine(
    repo: &Path,
    end_commit: &str,
    language: &str,
    jobs: usize,
    out_dir: &Path,
    config_file: Option<&Path>,
) -> AppResult<()> {
    let mut clock = StageClock::new();
    let profile = profile_for(language)?;
    fs::create_dir_all(out_dir)?;
    let planned = vec!["ledger_raw.csv".to_string(), "ledger.csv".to_string()];
    guard_outputs(out_dir, &planned, &[repo])?;

    let outcome = clock.stage("mine", || Ok(mine(repo, end_commit, &profile, jobs)?))?;
    for warning in &outcome.warnings {
        log::warn!("{warning}");
    }
    let head = outcome
        .commits
        .last()
        .map(|c| c.hash.clone())
        .unwrap_or_default();

    let raw = outcome.ledger.to_raw_ledger();
    write_ledger_csv(
        create_output(out_dir, "ledger_raw.csv")?,
        raw.iter().map(|(sig, rec)| (sig.as_str(), rec)),
    )?;
    let ledger = aggregate(&raw)?;
    write_ledger_csv(
        create_output(out_dir, "ledger.csv")?,
        ledger.iter().map(|(id, rec)| (id.rendered(), rec)),
    )?;

    let mut manifest = ManifestBuilder::new("mine");
    manifest
        .setting("repo", repo.display())
        .setting("end-commit", end_commit)
        .setting("language", language)
        .setting("jobs", jobs)
        .input_repo(repo, &head)
        .output("ledger_raw.csv")
        .output("ledger.csv");
    if let Some(path) = config_file {
        manifest.input_file("config", path)?;
    }
    clock.finish(out_dir)?;
    manifest.write(out_dir)
}

pub fn cmd_score(
    ledger_path: &Path,
    graph_spec: &GraphSpec,
    metrics: &[CpMetric],
    measures: &[Measure],
    out_dir: &Path,
    config_file: Option<&Path>,
) -> AppResult<()> {
    let mut clock = StageClock::new();
    fs::create_dir_all(out_dir)?;
    let mut planned = vec!["callgraph_normalized.tsv".to_string()];
    for &metric in metrics {
        planned.push(format!("cp_{metric}.csv"));
        for &measure in measures {
            planned.push(ranking_name(metric, measure));
        }
    }
    guard_outputs(out_dir, &planned, &[ledger_path, &graph_spec.path])?;

    let ledger = load_ledger(ledger_path)?;
    let stage = clock.stage("graph", || load_graph(graph_spec))?;
    fs::write(
        out_dir.join("callgraph_normalized.tsv"),
        write_edge_list(&stage.graph),
    )?;
    let (tables, configs) = clock.stage("scoring", || {
        score_all(&ledger, &stage.deps, metrics, measures)
    })?;
    write_cp_tables(out_dir, &tables)?;
    write_rankings(out_dir, &configs)?;

    let mut manifest = ManifestBuilder::new("score");
    describe_graph_settings(&mut manifest, graph_spec);
    manifest
        .setting("metric", join_labels(metrics))
        .setting("measure", join_labels(measures))
        .input_file("ledger", ledger_path)?
        .input_file("graph", &graph_spec.path)?;
    if let Some(path) = &graph_spec.tests_file {
        manifest.input_file("tests-file", path)?;
    }
    if let Some(path) = config_file {
        manifest.input_file("config", path)?;
    }
    for name in &planned {
        manifest.output(name.clone());
    }
    clock.finish(out_dir)?;
    manifest.write(out_dir)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_minimize(
    ledger_path: &Path,
    graph_spec: &GraphSpec,
    metrics: &[CpMetric],
    measures: &[Measure],
    budgets: &[f64],
    out_dir: &Path,
    config_file: Option<&Path>,
) -> AppResult<()> {
    let mut clock = StageClock::new();
    fs::create_dir_all(out_dir)?;
    let mut planned = Vec::new();
    for &metric in metrics {
        for &measure in measures {
            for &budget in budgets {
                planned.push(suite_name(metric, measure, budget));
            }
        }
    }
    guard_outputs(out_dir, &planned, &[ledger_path, &graph_spec.path])?;

    let ledger = load_ledger(ledger_path)?;
    let stage = clock.stage("graph", || load_graph(graph_spec))?;
    let (_, configs) = clock.stage("scoring", || {
        score_all(&ledger, &stage.deps, metrics, measures)
    })?;
    clock.stage("selection", || {
        for config in &configs {
            for &budget in budgets {
                let suite = select(&config.ranking, budget)?;
                write_suite(
                    create_output(out_dir, &suite_name(config.metric, config.measure, budget))?,
                    &suite,
                )?;
            }
        }
        Ok(())
    })?;

    let mut manifest = ManifestBuilder::new("minimize");
    describe_graph_settings(&mut manifest, graph_spec);
    manifest
        .setting("metric", join_labels(metrics))
        .setting("measure", join_labels(measures))
        .setting("budget", join_budgets(budgets))
        .input_file("ledger", ledger_path)?
        .input_file("graph", &graph_spec.path)?;
    if let Some(path) = &graph_spec.tests_file {
        manifest.input_file("tests-file", path)?;
    }
    if let Some(path) = config_file {
        manifest.input_file("config", path)?;
    }
    for name in &planned {
        manifest.output(name.clone());
    }
    clock.finish(out_dir)?;
    manifest.write(out_dir)
}

pub fn cmd_evaluate(
    suites: &[(String, PathBuf)],
    ground_truth: Option<&Path>,
    externals: &[(String, PathBuf)],
    compares: &[(String, String)],
    out_dir: &Path,
    config_file: Option<&Path>,
) -> AppResult<()> {
    let mut clock = StageClock::new();
    if suites.is_empty() {
        return Err(AppError::Usage(
            "at least one --suite LABEL=PATH is required".to_string(),
        ));
    }
    fs::create_dir_all(out_dir)?;
    let planned = vec!["report.txt".to_string(), "summary.csv".to_string()];
    let mut input_paths: Vec<&Path> = suites.iter().map(|(_, p)| p.as_path()).collect();
    input_paths.extend(externals.iter().map(|(_, p)| p.as_path()));
    if let Some(path) = ground_truth {
        input_paths.push(path);
    }
    guard_outputs(out_dir, &planned, &input_paths)?;

    let mut selected: Vec<(String, BTreeSet<MethodId>)> = Vec::new();
    for (label, path) in suites {
        let ids = read_suite(open_input(path)?)?;
        selected.push((label.clone(), ids.into_iter().collect()));
    }

    let run_started = clock.run_started();
    clock.stage("evaluation", || {
        evaluate_and_report(
            &selected,
            ground_truth,
            externals,
            compares,
            out_dir,
            run_started,
        )
    })?;

    let mut manifest = ManifestBuilder::new("evaluate");
    for (label, path) in suites {
        manifest.input_file(&format!("suite:{label}"), path)?;
    }
    for (label, path) in externals {
        manifest.input_file(&format!("external:{label}"), path)?;
    }
    if let Some(path) = ground_truth {
        manifest.input_file("ground-truth", path)?;
        manifest.setting("ground-truth", path.display());
    } else {
        manifest.setting("ground-truth", "none");
    }
    if let Some(path) = config_file {
        manifest.input_file("config", path)?;
    }
    manifest.output("report.txt").output("summary.csv");
    clock.finish(out_dir)?;
    manifest.write(out_dir)
}

/// Shared by `evaluate` and `pipeline`: per-suite reports, pairwise
/// comparisons, report.txt, summary.csv. Without ground truth the
/// report carries a notice and the summary is header-only.
fn evaluate_and_report(
    selected: &[(String, BTreeSet<MethodId>)],
    ground_truth: Option<&Path>,
    externals: &[(String, PathBuf)],
    compares: &[(String, String)],
    out_dir: &Path,
    run_started: Instant,
) -> AppResult<()> {
    let Some(truth_path) = ground_truth else {
        let mut text = String::from("[run]\nground_truth = none\n");
        text.push_str("notice = accuracy and FDR not computed; supply --ground-truth\n\n");
        for (label, suite) in selected {
            text.push_str(&format!("suite {label}: {} tests selected\n", suite.len()));
        }
        fs::write(out_dir.join("report.txt"), text)?;
        write_summary_csv(create_output(out_dir, "summary.csv")?, &[])?;
        return Ok(());
    };
    let truth = read_ground_truth(open_input(truth_path)?)?;

    let mut reports: Vec<EvaluationReport> = Vec::new();
    let mut rows_by_label: BTreeMap<String, Vec<OutcomeRow>> = BTreeMap::new();
    for (label, suite) in selected {
        let report = evaluate(&truth, suite, label.clone())?;
        rows_by_label.insert(label.clone(), report_rows(&report));
        reports.push(report);
    }
    for (label, path) in externals {
        let rows = read_external_outcomes(open_input(path)?)?;
        if rows_by_label.insert(label.clone(), rows).is_some() {
            return Err(AppError::Usage(format!(
                "outcome label `{label}` is defined twice"
            )));
        }
    }

    let mut comparisons: Vec<(String, Comparison)> = Vec::new();
    for (a, b) in compares {
        let rows_a = rows_by_label
            .get(a)
            .ok_or_else(|| AppError::Usage(format!("--compare references unknown label `{a}`")))?;
        let rows_b = rows_by_label
            .get(b)
            .ok_or_else(|| AppError::Usage(format!("--compare references unknown label `{b}`")))?;
        comparisons.push((format!("{a} vs {b}"), compare(rows_a, rows_b)?));
    }

    fs::write(
        out_dir.join("report.txt"),
        render_report(&reports, &comparisons),
    )?;
    let total = run_started.elapsed().as_secs_f64();
    let summary: Vec<SummaryRow> = reports
        .iter()
        .map(|r| SummaryRow {
            config: r.config.clone(),
            mean_accuracy: r.mean_accuracy,
            fdr: r.fdr,
            n_versions: r.n_versions,
            total_seconds: total,
        })
        .collect();
    write_summary_csv(create_output(out_dir, "summary.csv")?, &summary)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_pipeline(
    repo: &Path,
    end_commit: &str,
    language: &str,
    jobs: usize,
    graph_spec: &GraphSpec,
    metrics: &[CpMetric],
    measures: &[Measure],
    budgets: &[f64],
    ground_truth: Option<&Path>,
    externals: &[(String, PathBuf)],
    compares: &[(String, String)],
    out_dir: &Path,
    config_file: Option<&Path>,
) -> AppResult<()> {
    let mut clock = StageClock::new();
    let profile = profile_for(language)?;
    fs::create_dir_all(out_dir)?;

    let mut planned = vec![
        "ledger_raw.csv".to_string(),
        "ledger.csv".to_string(),
        "callgraph_normalized.tsv".to_string(),
        "report.txt".to_string(),
        "summary.csv".to_string(),
    ];
    for &metric in metrics {
        planned.push(format!("cp_{metric}.csv"));
        for &measure in measures {
            planned.push(ranking_name(metric, measure));
            for &budget in budgets {
                planned.push(suite_name(metric, measure, budget));
            }
        }
    }
    let mut input_paths: Vec<&Path> = vec![repo, &graph_spec.path];
    input_paths.extend(externals.iter().map(|(_, p)| p.as_path()));
    if let Some(path) = ground_truth {
        input_paths.push(path);
    }
    guard_outputs(out_dir, &planned, &input_paths)?;

    let outcome = clock.stage("mine", || Ok(mine(repo, end_commit, &profile, jobs)?))?;
    for warning in &outcome.warnings {
        log::warn!("{warning}");
    }
    let head = outcome
        .commits
        .last()
        .map(|c| c.hash.clone())
        .unwrap_or_default();
    let raw = outcome.ledger.to_raw_ledger();
    write_ledger_csv(
        create_output(out_dir, "ledger_raw.csv")?,
        raw.iter().map(|(sig, rec)| (sig.as_str(), rec)),
    )?;
    let ledger = aggregate(&raw)?;
    write_ledger_csv(
        create_output(out_dir, "ledger.csv")?,
        ledger.iter().map(|(id, rec)| (id.rendered(), rec)),
    )?;

    let stage = clock.stage("graph", || load_graph(graph_spec))?;
    fs::write(
        out_dir.join("callgraph_normalized.tsv"),
        write_edge_list(&stage.graph),
    )?;

    let (tables, configs) = clock.stage("scoring", || {
        score_all(&ledger, &stage.deps, metrics, measures)
    })?;
    write_cp_tables(out_dir, &tables)?;
    write_rankings(out_dir, &configs)?;

    let mut selected: Vec<(String, BTreeSet<MethodId>)> = Vec::new();
    clock.stage("selection", || {
        for config in &configs {
            for &budget in budgets {
                let suite = select(&config.ranking, budget)?;
                write_suite(
                    create_output(out_dir, &suite_name(config.metric, config.measure, budget))?,
                    &suite,
                )?;
                selected.push((
                    config_label(config.metric, config.measure, Some(budget)),
                    suite.selected.into_iter().collect(),
                ));
            }
        }
        Ok(())
    })?;

    let run_started = clock.run_started();
    clock.stage("evaluation", || {
        evaluate_and_report(
            &selected,
            ground_truth,
            externals,
            compares,
            out_dir,
            run_started,
        )
    })?;

    let mut manifest = ManifestBuilder::new("pipeline");
    describe_graph_settings(&mut manifest, graph_spec);
    manifest
        .setting("repo", repo.display())
        .setting("end-commit", end_commit)
        .setting("language", language)
        .setting("jobs", jobs)
        .setting("metric", join_labels(metrics))
        .setting("measure", join_labels(measures))
        .setting("budget", join_budgets(budgets))
        .input_repo(repo, &head)
        .input_file("graph", &graph_spec.path)?;
    if let Some(path) = &graph_spec.tests_file {
        manifest.input_file("tests-file", path)?;
    }
    if let Some(path) = ground_truth {
        manifest.input_file("ground-truth", path)?;
        manifest.setting("ground-truth", path.display());
    } else {
        manifest.setting("ground-truth", "none");
    }
    for (label, path) in externals {
        manifest.input_file(&format!("external:{label}"), path)?;
    }
    if let Some(path) = config_file {
        manifest.input_file("config", path)?;
    }
    for name in &planned {
        manifest.output(name.clone());
    }
    clock.finish(out_dir)?;
    manifest.write(out_dir)
}

fn describe_graph_settings(manifest: &mut ManifestBuilder, spec: &GraphSpec) {
    manifest.setting("graph", spec.path.display()).setting(
        "graph-format",
        match spec.format {
            GraphFormat::Callgraph => "callgraph",
            GraphFormat::Tsv => "tsv",
        },
    );
    if let Some(kinds) = &spec.call_kinds {
        let letters: String = kinds.iter().map(|k| k.letter()).collect();
        manifest.setting("call-kinds", letters);
    }
    if spec.strip_package_prefix {
        manifest.setting("strip-package-prefix", "true");
    }
    match &spec.selector {
        RootSelector::Glob(glob) => manifest.setting("tests", glob),
        RootSelector::Explicit(_) => manifest.setting(
            "tests-file",
            spec.tests_file
                .as_deref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ),
    };
}

fn join_labels<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_budgets(budgets: &[f64]) -> String {
    budgets
        .iter()
        .map(|b| format!("{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

//! churnmin: change-proneness based test-suite minimization.
//!
//! Subcommands mirror the pipeline stages. `mine` turns a git history
//! into a per-method change ledger, `score` ranks tests by the change
//! proneness of their dependencies, `minimize` cuts rankings at size
//! budgets, `evaluate` checks suites against fault-revealing ground
//! truth, and `pipeline` runs all stages in one process.

mod config;
mod ops;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{FileConfig, GraphFormat};

/// Failure carrying a stable exit code.
#[derive(Debug)]
pub enum AppError {
    /// Bad flags, config keys, or argument values.
    Usage(String),
    /// An input file or directory is missing or unreadable.
    Input(String),
    /// An input file exists but cannot be parsed.
    Format(String),
    /// Repository access or git failure.
    Repo(String),
    /// Inputs parse but describe degenerate data.
    Data(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Input(_) => 3,
            AppError::Format(_) => 4,
            AppError::Repo(_) => 5,
            AppError::Data(_) => 6,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(msg)
            | AppError::Input(msg)
            | AppError::Format(msg)
            | AppError::Repo(msg)
            | AppError::Data(msg) => f.write_str(msg),
        }
    }
}

impl From<churnmin_core::Error> for AppError {
    fn from(e: churnmin_core::Error) -> AppError {
        use churnmin_core::Error as E;
        match &e {
            E::Io(_) => AppError::Input(e.to_string()),
            E::Csv(_) | E::Input(_) | E::GraphParse { .. } | E::Normalize { .. }
            | E::Extraction { .. } => AppError::Format(e.to_string()),
            E::Git(_) | E::CommitIdentifier { .. } | E::RepoAccess { .. } => {
                AppError::Repo(e.to_string())
            }
            E::Domain(_) | E::UnknownTest(_) => AppError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> AppError {
        AppError::Input(format!("io error: {e}"))
    }
}

const EXIT_HELP: &str = "Exit codes:
  0  success
  2  usage error: bad flags, config keys, or values (budgets outside (0, 1])
  3  missing or unreadable input file
  4  input file exists but cannot be parsed
  5  repository access or git failure
  6  degenerate data: no matching tests, empty history, empty ground truth";

#[derive(Parser)]
#[command(
    name = "churnmin",
    version,
    about = "Test-suite minimization driven by method-level change proneness",
    after_help = EXIT_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// key=value configuration file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (also CHURNMIN_OUT or config `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Log progress details to stderr.
    #[arg(long, short = 'v')]
    verbose: bool,
}

#[derive(Args)]
struct RepoArgs {
    /// Git repository to mine.
    #[arg(long, value_name = "DIR")]
    repo: Option<PathBuf>,

    /// Newest commit of the analyzed range (default HEAD).
    #[arg(long = "end-commit", value_name = "REV")]
    end_commit: Option<String>,

    /// Worker processes for mining (also CHURNMIN_JOBS; default 1).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,

    /// Source language profile (default java).
    #[arg(long, value_name = "NAME")]
    language: Option<String>,
}

#[derive(Args)]
struct GraphArgs {
    /// Static call graph file.
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,

    /// Graph file format: callgraph or tsv (default callgraph).
    #[arg(long = "graph-format", value_name = "FORMAT")]
    graph_format: Option<String>,

    /// Call-edge kinds to keep, as letters like MIS (default: all).
    #[arg(long = "call-kinds", value_name = "LETTERS")]
    call_kinds: Option<String>,

    /// Reduce dotted package prefixes to simple names.
    #[arg(long = "strip-package-prefix")]
    strip_package_prefix: bool,

    /// Glob over rendered method ids selecting test roots.
    #[arg(long, value_name = "GLOB")]
    tests: Option<String>,

    /// File listing test root ids, one per line.
    #[arg(long = "tests-file", value_name = "FILE")]
    tests_file: Option<PathBuf>,
}

#[derive(Args)]
struct MetricArgs {
    /// Change-proneness metrics, comma separated (default: all).
    #[arg(long = "metric", value_name = "NAME", value_delimiter = ',')]
    metric: Vec<String>,

    /// Aggregation measures, comma separated (default: all).
    #[arg(long = "measure", value_name = "NAME", value_delimiter = ',')]
    measure: Vec<String>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Size budgets as fractions or percents (default 0.25,0.5,0.75).
    #[arg(long = "budget", value_name = "B", value_delimiter = ',')]
    budget: Vec<String>,
}

#[derive(Args)]
struct TruthArgs {
    /// Fault-revealing ground truth file (version<TAB>test per line).
    #[arg(long = "ground-truth", value_name = "FILE")]
    ground_truth: Option<PathBuf>,

    /// External outcome CSV to include in comparisons.
    #[arg(long = "external", value_name = "LABEL=PATH", value_parser = config::parse_labeled_path)]
    external: Vec<(String, PathBuf)>,

    /// Labels to compare with an exact test on detection counts.
    #[arg(long = "compare", value_name = "A,B", value_parser = config::parse_compare_pair)]
    compare: Vec<(String, String)>,
}

#[derive(Subcommand)]
enum Command {
    /// Mine per-method change history from a git repository.
    Mine {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        repo: RepoArgs,
    },

    /// Compute change proneness and rank tests.
    Score {
        #[command(flatten)]
        common: CommonArgs,
        /// Change ledger CSV produced by `mine`.
        #[arg(long, value_name = "FILE")]
        ledger: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        metrics: MetricArgs,
    },

    /// Cut rankings at size budgets into minimized suites.
    Minimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Change ledger CSV produced by `mine`.
        #[arg(long, value_name = "FILE")]
        ledger: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[command(flatten)]
        budgets: BudgetArgs,
    },

    /// Evaluate minimized suites against ground truth.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Suite file with a label, repeatable.
        #[arg(long = "suite", value_name = "LABEL=PATH", value_parser = config::parse_labeled_path)]
        suite: Vec<(String, PathBuf)>,
        #[command(flatten)]
        truth: TruthArgs,
    },

    /// Run mine, score, minimize, and evaluate in one process.
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        repo: RepoArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[command(flatten)]
        budgets: BudgetArgs,
        #[command(flatten)]
        truth: TruthArgs,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Mine { common, .. }
            | Command::Score { common, .. }
            | Command::Minimize { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Pipeline { common, .. } => common,
        }
    }
}

fn resolve_graph_spec(graph: GraphArgs, file: &FileConfig) -> AppResult<config::GraphSpec> {
    let format = match graph.graph_format {
        Some(text) => Some(text.parse::<GraphFormat>().map_err(AppError::Usage)?),
        None => None,
    };
    config::resolve_graph(
        graph.graph,
        format,
        graph.call_kinds,
        graph.strip_package_prefix,
        graph.tests,
        graph.tests_file,
        file,
    )
}

fn run(command: Command) -> AppResult<()> {
    match command {
        Command::Mine { common, repo } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let out = config::resolve_out(common.out, &file)?;
            let jobs = config::resolve_jobs(repo.jobs, &file)?;
            let (repo_path, end, language) =
                config::resolve_repo(repo.repo, repo.end_commit, repo.language, &file)?;
            ops::cmd_mine(&repo_path, &end, &language, jobs, &out, file.path.as_deref())
        }
        Command::Score {
            common,
            ledger,
            graph,
            metrics,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let out = config::resolve_out(common.out, &file)?;
            let ledger = config::resolve_ledger(ledger, &file)?;
            let spec = resolve_graph_spec(graph, &file)?;
            let metric_list = config::resolve_metrics(metrics.metric, &file)?;
            let measure_list = config::resolve_measures(metrics.measure, &file)?;
            ops::cmd_score(
                &ledger,
                &spec,
                &metric_list,
                &measure_list,
                &out,
                file.path.as_deref(),
            )
        }
        Command::Minimize {
            common,
            ledger,
            graph,
            metrics,
            budgets,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let out = config::resolve_out(common.out, &file)?;
            let ledger = config::resolve_ledger(ledger, &file)?;
            let spec = resolve_graph_spec(graph, &file)?;
            let metric_list = config::resolve_metrics(metrics.metric, &file)?;
            let measure_list = config::resolve_measures(metrics.measure, &file)?;
            let budget_list = config::resolve_budgets(budgets.budget, &file)?;
            ops::cmd_minimize(
                &ledger,
                &spec,
                &metric_list,
                &measure_list,
                &budget_list,
                &out,
                file.path.as_deref(),
            )
        }
        Command::Evaluate {
            common,
            suite,
            truth,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let out = config::resolve_out(common.out, &file)?;
            let ground_truth = truth.ground_truth.or_else(|| file.path_value("ground-truth"));
            ops::cmd_evaluate(
                &suite,
                ground_truth.as_deref(),
                &truth.external,
                &truth.compare,
                &out,
                file.path.as_deref(),
            )
        }
        Command::Pipeline {
            common,
            repo,
            graph,
            metrics,
            budgets,
            truth,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let out = config::resolve_out(common.out, &file)?;
            let jobs = config::resolve_jobs(repo.jobs, &file)?;
            let (repo_path, end, language) =
                config::resolve_repo(repo.repo, repo.end_commit, repo.language, &file)?;
            let spec = resolve_graph_spec(graph, &file)?;
            let metric_list = config::resolve_metrics(metrics.metric, &file)?;
            let measure_list = config::resolve_measures(metrics.measure, &file)?;
            let budget_list = config::resolve_budgets(budgets.budget, &file)?;
            let ground_truth = truth.ground_truth.or_else(|| file.path_value("ground-truth"));
            ops::cmd_pipeline(
                &repo_path,
                &end,
                &language,
                jobs,
                &spec,
                &metric_list,
                &measure_list,
                &budget_list,
                ground_truth.as_deref(),
                &truth.external,
                &truth.compare,
                &out,
                file.path.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.command.common().verbose {
        "info"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("churnmin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

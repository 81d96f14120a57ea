//! The `bisectfl` command line.
//!
//! Exit codes: 0 success, 1 usage, configuration or toolchain error, 2
//! inconclusive bisection. Results go to files; stdout gets one summary
//! line.

mod simulate;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{GlobalConfig, ENV_CONFIG};
use crate::engine::{retrieve_initial, run_basic, EngineError, EngineOptions, ReportStatus};
use crate::eval::{evaluate, load_results, parse_truth, EvalOptions};
use crate::sbfl::{localize, parse_history, parse_spectrum, FormulaKind, HistoryStats, Scoring, TiePolicy};
use crate::{Exact, Real};

pub use simulate::{simulate_bundle, SimBundle, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bisectfl",
    version,
    about = "Compiler fault isolation: bisect to the bug-inducing commit, score spectra, evaluate rankings"
)]
pub struct Cli {
    /// Tool settings file (TOML).
    #[arg(long, global = true, env = ENV_CONFIG, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the bug-inducing commit of a bug case and list its source files.
    Bisect(BisectArgs),
    /// Rank files by suspiciousness from a coverage spectrum.
    Score(ScoreArgs),
    /// Compute Top-N, MFR, MAR and overlap over technique results.
    Eval(EvalArgs),
    /// Write a simulated bug case bundle.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct BisectArgs {
    /// Bug case file (TOML).
    #[arg(long, value_name = "FILE")]
    pub case: PathBuf,
    /// Probe every major release instead of stopping at the first failure.
    #[arg(long)]
    pub exhaustive_majors: bool,
    /// Give up after this many oracle calls.
    #[arg(long, value_name = "N")]
    pub max_probes: Option<usize>,
    /// Report path [default: <output_dir>/<case id>.report.json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Ochiai,
    Tarantula,
    Ochiai2,
    Op2,
    Barinel,
    Dstar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Worst,
    Best,
    Deterministic,
}

impl From<PolicyArg> for TiePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Worst => TiePolicy::WorstCase,
            PolicyArg::Best => TiePolicy::BestCase,
            PolicyArg::Deterministic => TiePolicy::Deterministic,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Spectrum file (RUN/COV records).
    #[arg(long, value_name = "FILE")]
    pub spectrum: PathBuf,
    /// Suspiciousness formula.
    #[arg(long, value_enum, default_value = "ochiai")]
    pub formula: FormulaArg,
    /// Exponent for the dstar formula.
    #[arg(long, value_name = "N", default_value_t = crate::sbfl::DEFAULT_DSTAR_POWER)]
    pub dstar_power: u32,
    /// Blend the formula with historical scores (needs --history).
    #[arg(long, requires = "history")]
    pub hsfl: bool,
    /// History stats file (MOD records).
    #[arg(long, value_name = "FILE", requires = "hsfl")]
    pub history: Option<PathBuf>,
    /// Weight of the historical score, in [0, 1].
    #[arg(long, value_name = "A", default_value_t = crate::sbfl::DEFAULT_ALPHA, requires = "hsfl")]
    pub alpha: f64,
    /// How tied scores are ranked in the output.
    #[arg(long, value_enum, default_value = "best")]
    pub tie_policy: PolicyArg,
    /// Ranking path [default: <output_dir>/ranking.json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth file (BUG/FAULTY records).
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Results directory: <technique>/<bug>.json or <technique>/<run>/<bug>.json.
    #[arg(long, value_name = "DIR")]
    pub results: PathBuf,
    /// Tie policy for every output [default: best for rankings, worst for file sets].
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Compute means as exact fractions.
    #[arg(long)]
    pub exact: bool,
    /// Report path; a plain-text table is written next to it with a .txt
    /// extension [default: <output_dir>/report.json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of commits.
    #[arg(long, value_name = "N")]
    pub n: usize,
    /// Index of the bug-inducing commit (0-based, below N).
    #[arg(long, value_name = "INDEX")]
    pub bic: usize,
    /// Generator seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Files touched by each commit.
    #[arg(long, value_name = "K", default_value_t = 3)]
    pub files_per_commit: usize,
    /// Bundle directory (case.toml, program.c, history.txt).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn error(message: impl ToString) -> Self {
        CliError {
            code: EXIT_ERROR,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::error(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::error(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::error(format!("{}: {e}", path.display())))
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn engine_error(e: EngineError) -> CliError {
    let code = match e {
        EngineError::ProbeBudget(_) => EXIT_INCONCLUSIVE,
        _ => EXIT_ERROR,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

fn cmd_bisect(args: &BisectArgs, global: &GlobalConfig) -> Result<(i32, String), CliError> {
    let loaded = retrieve_initial(&args.case, global).map_err(engine_error)?;
    if let Some(w) = &loaded.cache_warning {
        log::warn!("{w}");
    }
    let options = EngineOptions {
        exhaustive_majors: args.exhaustive_majors,
        max_probes: args.max_probes,
    };
    let report = run_basic(loaded.history.as_ref(), loaded.oracle.as_ref(), &loaded.case, options)
        .map_err(engine_error)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| global.output_dir.join(format!("{}.report.json", report.bug_id)));
    write_file(&out, &pretty(&report))?;
    Ok(match (report.status, &report.bic) {
        (ReportStatus::Found, Some(bic)) => (
            EXIT_OK,
            format!(
                "{}: bug-inducing commit {bic}, {} candidate file(s), {} oracle call(s) -> {}",
                report.bug_id,
                report.candidate_files.len(),
                report.oracle_calls,
                out.display()
            ),
        ),
        _ => {
            let window = report
                .remaining
                .as_ref()
                .map(|r| format!("{} commit(s) after {} up to {}", r.commits.len(), r.good, r.bad))
                .unwrap_or_default();
            (
                EXIT_INCONCLUSIVE,
                format!("{}: inconclusive, {window} -> {}", report.bug_id, out.display()),
            )
        }
    })
}

fn cmd_score(args: &ScoreArgs, global: &GlobalConfig) -> Result<(i32, String), CliError> {
    let name = args.formula.to_possible_value().expect("named").get_name().to_string();
    let formula = FormulaKind::from_name(&name, args.dstar_power).map_err(CliError::error)?;
    let runs = parse_spectrum(&read_file(&args.spectrum)?)
        .map_err(|e| CliError::error(format!("{}: {e}", args.spectrum.display())))?;
    let (scoring, history) = if args.hsfl {
        if !(0.0..=1.0).contains(&args.alpha) {
            return Err(CliError::error(crate::sbfl::SbflError::BadAlpha(args.alpha)));
        }
        let path = args.history.as_ref().ok_or_else(|| CliError::error("--hsfl needs --history"))?;
        let history =
            parse_history(&read_file(path)?).map_err(|e| CliError::error(format!("{}: {e}", path.display())))?;
        (
            Scoring::Hsfl {
                formula,
                alpha: args.alpha,
            },
            history,
        )
    } else {
        (Scoring::Plain(formula), HistoryStats::new())
    };
    let ranking = localize::<Real>(&runs, scoring, &history, args.tie_policy.into()).map_err(CliError::error)?;
    let out = args.out.clone().unwrap_or_else(|| global.output_dir.join("ranking.json"));
    let mut doc = serde_json::to_value(&ranking).expect("serializable");
    doc["formula"] = serde_json::json!(formula.to_string());
    if let Scoring::Hsfl { alpha, .. } = scoring {
        doc["hsfl_alpha"] = serde_json::json!(alpha);
    }
    write_file(&out, &pretty(&doc))?;
    let top = ranking
        .entries
        .first()
        .map(|e| format!(", top {}", e.file))
        .unwrap_or_default();
    Ok((
        EXIT_OK,
        format!(
            "ranked {} file(s) with {}{}{top} -> {}",
            ranking.len(),
            formula,
            if args.hsfl { "+hsfl" } else { "" },
            out.display()
        ),
    ))
}

fn cmd_eval(args: &EvalArgs, global: &GlobalConfig) -> Result<(i32, String), CliError> {
    let truths = parse_truth(&read_file(&args.truth)?)
        .map_err(|e| CliError::error(format!("{}: {e}", args.truth.display())))?;
    let results = load_results::<Real>(&args.results).map_err(CliError::error)?;
    let options = EvalOptions {
        policy: args.policy.map(Into::into),
        ..EvalOptions::default()
    };
    let (json, text, n_tech, n_bugs) = if args.exact {
        let r = evaluate::<Real, Exact>(&results, &truths, &options).map_err(CliError::error)?;
        (r.to_json(), r.to_text(), r.techniques.len(), r.bugs.len())
    } else {
        let r = evaluate::<Real, Real>(&results, &truths, &options).map_err(CliError::error)?;
        (r.to_json(), r.to_text(), r.techniques.len(), r.bugs.len())
    };
    let out = args.out.clone().unwrap_or_else(|| global.output_dir.join("report.json"));
    write_file(&out, &pretty(&json))?;
    let text_out = out.with_extension("txt");
    write_file(&text_out, &text)?;
    Ok((
        EXIT_OK,
        format!(
            "evaluated {n_tech} technique(s) over {n_bugs} bug(s) -> {}, {}",
            out.display(),
            text_out.display()
        ),
    ))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(i32, String), CliError> {
    let bundle = simulate_bundle(args.n, args.bic, args.seed, args.files_per_commit).map_err(CliError::error)?;
    bundle.write(&args.out).map_err(CliError::error)?;
    Ok((
        EXIT_OK,
        format!(
            "simulated {} commit(s), bug-inducing commit {}, seed {} -> {}",
            args.n,
            crate::vcs::sim_commit_id(args.bic),
            args.seed,
            args.out.display()
        ),
    ))
}

/// Runs a parsed command line and returns the exit code with its summary
/// or diagnostic.
pub fn execute(cli: &Cli) -> Result<(i32, String), CliError> {
    let global = GlobalConfig::load(cli.config.as_deref()).map_err(CliError::error)?;
    match &cli.command {
        Command::Bisect(a) => cmd_bisect(a, &global),
        Command::Score(a) => cmd_score(a, &global),
        Command::Eval(a) => cmd_eval(a, &global),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Entry point used by the binary. Usage errors exit with 1, not clap's 2,
/// so that 2 always means an inconclusive bisection.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok((code, summary)) => {
            println!("{summary}");
            code
        }
        Err(e) => {
            eprintln!("bisectfl: {e}");
            e.code
        }
    }
}

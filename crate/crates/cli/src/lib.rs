//! Batch front end for `riccati-kit`: reads a JSON scenario, runs one
//! pipeline and writes CSV artifacts plus a `report.json` into `--out`.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 numerical
//! failure (a solution escaped where regularity was required), 1 I/O error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Caps the worker threads used for sampling.
pub const THREADS_ENV: &str = "RICCATI_KIT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<riccati_kit::Error> for CliError {
    fn from(e: riccati_kit::Error) -> Self {
        use riccati_kit::Error as E;
        match e {
            E::InvalidInput(msg) => CliError::Validation(msg),
            E::DimensionMismatch { .. } | E::OutOfDomain { .. } | E::UnknownScenario(_) | E::SingularInitialPhi => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "riccati-kit", version, about = "Matrix Riccati equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate Z from z0 and write its trajectory.
    Solve(Common),
    /// Reconstruct the member through z0 + lambda from the base solution.
    Family(Common),
    /// Evaluate the determinant and reciprocity identities for z0 and z0 + lambda.
    Identities(Common),
    /// Normal / extremal / not regular verdict for the solution through z0.
    ClassifySolution(Common),
    /// Sample initial values and classify the equation.
    ClassifyEquation(Common),
    /// Build the extremal solution from the tail integral of the base z0.
    Principal(Common),
    /// Determinant-ratio diagnostics for two solutions of the linear system.
    SystemDiagnostics(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Sampling seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// End of the time span; overrides the config.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Family(_) => "family",
            Command::Identities(_) => "identities",
            Command::ClassifySolution(_) => "classify-solution",
            Command::ClassifyEquation(_) => "classify-equation",
            Command::Principal(_) => "principal",
            Command::SystemDiagnostics(_) => "system-diagnostics",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Solve(c)
            | Command::Family(c)
            | Command::Identities(c)
            | Command::ClassifySolution(c)
            | Command::ClassifyEquation(c)
            | Command::Principal(c)
            | Command::SystemDiagnostics(c) => c,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    verdict: &'a str,
    confidence: f64,
    evidence: &'a Value,
    config: &'a RunConfig,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(line) => {
            println!("{line}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("riccati-kit: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| CliError::Validation(format!("{}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(h) = common.horizon {
        cfg.horizon = h;
    }
    if let Some(r) = common.rel_tol {
        cfg.integrator.rel_tol = r;
    }
    if let Some(a) = common.abs_tol {
        cfg.integrator.abs_tol = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(None) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

fn execute(command: &Command) -> Result<String, CliError> {
    let common = command.common();
    let cfg = load_config(common)?;
    let pipeline = || match command {
        Command::Solve(_) => commands::solve_cmd(&cfg),
        Command::Family(_) => commands::family_cmd(&cfg),
        Command::Identities(_) => commands::identities_cmd(&cfg),
        Command::ClassifySolution(_) => commands::classify_solution_cmd(&cfg),
        Command::ClassifyEquation(_) => commands::classify_equation_cmd(&cfg),
        Command::Principal(_) => commands::principal_cmd(&cfg),
        Command::SystemDiagnostics(_) => commands::system_diagnostics_cmd(&cfg),
    };
    let result = match thread_pool()? {
        Some(pool) => pool.install(pipeline),
        None => pipeline(),
    };

    let (outcome, failure) = match result {
        Ok(o) => (o, None),
        Err(CliError::Numerical(msg)) => {
            let o = commands::Outcome {
                verdict: "numerical_failure".into(),
                confidence: 0.0,
                evidence: json!({ "error": msg }),
                files: Vec::new(),
            };
            (o, Some(CliError::Numerical(msg)))
        }
        Err(e) => return Err(e),
    };
    let report = Report {
        command: command.name(),
        verdict: &outcome.verdict,
        confidence: outcome.confidence,
        evidence: &outcome.evidence,
        config: &cfg,
    };
    let mut body = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    body.push('\n');
    let mut files = outcome.files;
    files.push(("report.json".into(), body));
    output::write_all(&common.out, &files)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(format!(
            "{}: {} (confidence {}) -> {}",
            command.name(),
            outcome.verdict,
            output::num(outcome.confidence),
            common.out.display()
        )),
    }
}

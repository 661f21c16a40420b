//! `opdyn` — config-driven recurrence analysis of operator families.
//!
//! Exit codes: 0 on completion, 1 when a replayed example misses its stored
//! expectations, 2 when any feasibility solve fails, 3 on config errors
//! (schema, validation, operator-set build, unreadable files).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opdyn_core::scenarios::{build_example, run_scenario, SCENARIO_NAMES};

mod config;
mod engine;
mod report;

use config::{AnalysisSpec, ConfigError};
use engine::EngineError;

const EXIT_EXPECTATION_FAILED: u8 = 1;
const EXIT_SOLVER_FAILURE: u8 = 2;
const EXIT_CONFIG_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "opdyn",
    version,
    about = "Recurrence analysis of operator families on finite-dimensional spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis in a config and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Like `analyze`, but the config must contain exactly one
    /// `certify_set` analysis.
    CertifySet(AnalyzeArgs),
    /// Like `analyze`, but the config must contain exactly one
    /// `construct` analysis.
    Construct(AnalyzeArgs),
    /// List or replay the curated example scenarios.
    Examples {
        #[command(subcommand)]
        command: ExamplesCommand,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Path to the JSON config document.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; the OPDYN_WORKERS environment variable takes
    /// precedence, and 0 or absence means one per core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum ExamplesCommand {
    /// Print the known example names with descriptions.
    List,
    /// Replay one example against its stored expectations.
    Run {
        name: String,
        /// Write the JSON replay report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// The kind (if any) a shortcut subcommand restricts the config to.
fn required_kind(command: &Command) -> Option<&'static str> {
    match command {
        Command::CertifySet(_) => Some("certify_set"),
        Command::Construct(_) => Some("construct"),
        _ => None,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) | Command::CertifySet(args) | Command::Construct(args) => {
            run_analyze(args, required_kind(&cli.command))
        }
        Command::Examples { command } => run_examples(command),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { message: message.into(), code: EXIT_CONFIG_ERROR }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::config(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("reading {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::config(format!("writing {}: {e}", path.display())))
}

fn run_analyze(args: &AnalyzeArgs, only_kind: Option<&'static str>) -> Result<ExitCode, Failure> {
    let text = read_file(&args.config)?;
    if let Some(kind) = only_kind {
        check_single_kind(&text, kind)?;
    }
    let outcome = engine::run_analysis(&text, args.seed, args.workers)?;
    let mut json = outcome.report.to_json();
    json.push('\n');
    write_file(&args.out, &json)?;
    let errors = outcome
        .report
        .analyses
        .iter()
        .filter(|a| a.status == report::Status::Error)
        .count();
    println!(
        "report written to {} ({} analyses, {} errors)",
        args.out.display(),
        outcome.report.analyses.len(),
        errors
    );
    if outcome.solver_failure {
        Ok(ExitCode::from(EXIT_SOLVER_FAILURE))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

/// Shortcut subcommands accept the same config format but insist on a single
/// analysis of their kind.
fn check_single_kind(text: &str, kind: &'static str) -> Result<(), Failure> {
    let config = config::parse_config(text).map_err(|e: ConfigError| Failure::config(e.to_string()))?;
    let kinds: Vec<&str> = config
        .analyses
        .iter()
        .map(AnalysisSpec::kind_name)
        .collect();
    if kinds.len() != 1 || kinds[0] != kind {
        return Err(Failure::config(format!(
            "this subcommand requires exactly one '{kind}' analysis, config has [{}]",
            kinds.join(", ")
        )));
    }
    Ok(())
}

fn run_examples(command: &ExamplesCommand) -> Result<ExitCode, Failure> {
    match command {
        ExamplesCommand::List => {
            for name in SCENARIO_NAMES {
                let scenario =
                    build_example(name).map_err(|e| Failure::config(e.to_string()))?;
                println!("{name}: {}", scenario.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        ExamplesCommand::Run { name, out } => {
            let scenario = build_example(name).map_err(|e| Failure::config(e.to_string()))?;
            let replay = run_scenario(&scenario);
            let json = serde_json::to_string_pretty(&replay)
                .expect("scenario reports serialize infallibly");
            match out {
                Some(path) => write_file(path, &format!("{json}\n"))?,
                None => println!("{json}"),
            }
            for check in &replay.results {
                let mark = if check.passed { "ok" } else { "FAILED" };
                eprintln!("  {mark}: {} — {}", check.label, check.detail);
            }
            if replay.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_EXPECTATION_FAILED))
            }
        }
    }
}

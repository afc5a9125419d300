use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbm::decimation::{audit_decimation, decimation_match};
use mbm::{solve_exact, PointCloud};
use mbm_cli::config::{ExperimentConfig, SEED_ENV};
use mbm_cli::report::{to_stable_json, Status};
use mbm_cli::{run_selftest, run_to_files, SelftestOptions};
use serde_json::json;

const EXIT_CHECK: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "mbm", version, about = "Euclidean bipartite matching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the report path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the fast property suite.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        /// Inflate every solver length in the decimation checks by 10%.
        #[arg(long)]
        inject_fault: bool,
        /// Also write the results as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve one instance exactly and print the matching.
    Solve { x: PathBuf, y: PathBuf },
    /// Run the recursive construction on one instance and audit it.
    Decimate {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        depth: u32,
    },
}

fn fail(kind: &str, message: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message.to_string() }));
    ExitCode::from(code)
}

fn default_seed() -> Result<u64, String> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV}={s:?} is not an unsigned integer")),
        Err(_) => Ok(mbm_cli::config::DEFAULT_SEED),
    }
}

fn read_pair(x: &PathBuf, y: &PathBuf) -> Result<(PointCloud, PointCloud), ExitCode> {
    let x = PointCloud::read_csv_file(x, None).map_err(|e| fail("input", e, EXIT_USAGE))?;
    let y = PointCloud::read_csv_file(y, Some(x.dim())).map_err(|e| fail("input", e, EXIT_USAGE))?;
    Ok((x, y))
}

fn print_json<T: serde::Serialize>(value: &T) -> ExitCode {
    match to_stable_json(value) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => fail("output", e, EXIT_CHECK),
    }
}

fn run(config: PathBuf, seed: Option<u64>, workers: Option<usize>, output: Option<PathBuf>) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail("config", e, EXIT_USAGE),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    if let Some(output) = output {
        cfg.output = output;
    }
    let env = std::env::var(SEED_ENV).ok();
    if let Err(e) = cfg.resolve_seed(env.as_deref()).and_then(|_| cfg.validate()) {
        return fail("config", e, EXIT_USAGE);
    }
    match run_to_files(&cfg) {
        Ok((report, _)) => {
            for c in &report.checks {
                println!("{} {}: {}", status_word(c.status), c.name, c.detail);
            }
            println!("report written to {}", cfg.output.display());
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK)
            }
        }
        Err(e) => fail("compute", format!("{e:#}"), EXIT_CHECK),
    }
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skipped => "SKIP",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            output,
        } => run(config, seed, workers, output),
        Command::Selftest {
            seed,
            inject_fault,
            output,
        } => {
            let seed = match seed.map(Ok).unwrap_or_else(default_seed) {
                Ok(s) => s,
                Err(e) => return fail("usage", e, EXIT_USAGE),
            };
            let report = match run_selftest(SelftestOptions { seed, inject_fault }) {
                Ok(r) => r,
                Err(e) => return fail("compute", e, EXIT_CHECK),
            };
            for c in &report.checks {
                println!("{} {}: {}", status_word(c.status), c.name, c.detail);
            }
            if let Some(path) = output {
                let written = to_stable_json(&report)
                    .map_err(anyhow::Error::from)
                    .and_then(|s| std::fs::write(&path, s).map_err(anyhow::Error::from));
                if let Err(e) = written {
                    return fail("output", e, EXIT_CHECK);
                }
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK)
            }
        }
        Command::Solve { x, y } => {
            let (x, y) = match read_pair(&x, &y) {
                Ok(p) => p,
                Err(code) => return code,
            };
            match solve_exact(&x, &y) {
                Ok(m) => print_json(&m),
                Err(e) => fail("compute", e, EXIT_CHECK),
            }
        }
        Command::Decimate { x, y, depth } => {
            let (x, y) = match read_pair(&x, &y) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let result = match decimation_match(&x, &y, depth, solve_exact) {
                Ok(r) => r,
                Err(e @ mbm::Error::DepthGuard { .. }) => return fail("usage", e, EXIT_USAGE),
                Err(e) => return fail("compute", e, EXIT_CHECK),
            };
            let audit = match audit_decimation(&x, &y, &result) {
                Ok(a) => a,
                Err(e) => return fail("compute", e, EXIT_CHECK),
            };
            let code = print_json(&json!({ "result": result, "audit": audit }));
            if audit.passed() {
                code
            } else {
                ExitCode::from(EXIT_CHECK)
            }
        }
    }
}

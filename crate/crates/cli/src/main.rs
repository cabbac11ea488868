use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slopebench_cli::config::load_config;
use slopebench_cli::problems::Registry;
use slopebench_cli::report::{emit_report, ReportFormat};
use slopebench_cli::runner::{check_against, run_experiment, write_outputs};

#[derive(Parser)]
#[command(name = "slopebench", version, about = "Descent diagnostics for MM solvers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config; writes trace.csv and report.json.
    Run {
        config: PathBuf,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// List problems, solvers, and checks.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Re-run a config deterministically and compare a stored trace to it.
    Check {
        trace: PathBuf,
        #[arg(long)]
        against: PathBuf,
        /// Print the re-run report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG_ERROR)
        }
    }
}

fn dispatch(cli: Cli) -> slopebench_core::Result<ExitCode> {
    let registry = Registry::builtin();
    match cli.cmd {
        Cmd::Run { config, json } => {
            let cfg = load_config(&config)?;
            let (trace, rows) = run_experiment(&cfg, &registry)?;
            let (trace_path, report_path) = write_outputs(&cfg, &trace, &rows)?;
            if rows.is_empty() {
                println!("no checks requested");
            } else {
                let fmt = if json { ReportFormat::Json } else { ReportFormat::Text };
                print!("{}", emit_report(&rows, fmt)?);
            }
            eprintln!("trace: {}", trace_path.display());
            eprintln!("report: {}", report_path.display());
            Ok(if rows.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILURE)
            })
        }
        Cmd::List { json } => {
            let listing = registry.listing();
            if json {
                let text = serde_json::to_string_pretty(&listing)
                    .map_err(|e| slopebench_core::Error::invalid(e.to_string()))?;
                println!("{text}");
            } else {
                println!("problems:");
                for e in &listing.problems {
                    println!("  {:<18} {}", e.id, e.summary);
                }
                println!("solvers:");
                for e in &listing.solvers {
                    println!("  {:<18} {}", e.id, e.summary);
                }
                println!("checks:");
                for c in &listing.checks {
                    println!("  {c}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { trace, against, json } => {
            let cfg = load_config(&against)?;
            let (matches, rows) = check_against(&trace, &cfg, &registry)?;
            println!("trace {}: {}", trace.display(), if matches { "match" } else { "mismatch" });
            if !rows.is_empty() {
                let fmt = if json { ReportFormat::Json } else { ReportFormat::Text };
                print!("{}", emit_report(&rows, fmt)?);
            }
            Ok(if matches && rows.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILURE)
            })
        }
    }
}

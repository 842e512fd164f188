use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use pobs_experiments::config::{ConfigFile, ExperimentConfig};
use pobs_experiments::{run, verify, Experiment, RunError};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "pobs",
    version,
    about = "Run seeded experiments and the acceptance suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write <name>.csv and <name>.report.json.
    Run {
        /// JSON file with experiment, params, seed and out.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parameter override, repeatable; the value is parsed as JSON when possible.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run every acceptance criterion and print a pass/fail matrix.
    Verify {
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// List experiments with their default parameters.
    List,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

const CONFIG_ERROR: u8 = 2;

fn config_error(kind: &str, message: impl std::fmt::Display) -> ExitCode {
    println!(
        "{}",
        json!({"error": {"kind": kind, "message": message.to_string()}})
    );
    ExitCode::from(CONFIG_ERROR)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return config_error("usage", e.render()),
    };
    match cli.command {
        Command::Run {
            config,
            experiment,
            seed,
            out,
            params,
            jobs,
        } => {
            if jobs == 0 {
                return config_error("invalid_value", "--jobs must be at least 1");
            }
            let file = match config.as_deref().map(ConfigFile::load).transpose() {
                Ok(f) => f.unwrap_or_default(),
                Err(e) => return config_error(e.kind(), e),
            };
            let cfg =
                match ExperimentConfig::resolve(file, experiment.as_deref(), seed, out, &params) {
                    Ok(c) => c,
                    Err(e) => return config_error(e.kind(), e),
                };
            run_one(&cfg, jobs)
        }
        Command::Verify { jobs } => {
            let results = verify::run_all(jobs.max(1));
            let mut all = true;
            for r in &results {
                println!("{}", r.line());
                all &= r.pass();
            }
            let passed = results.iter().filter(|r| r.pass()).count();
            println!("{passed}/{} passed", results.len());
            if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::List => {
            for e in Experiment::ALL {
                let params: serde_json::Map<_, _> = e
                    .defaults()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
                println!("{e} {}", serde_json::Value::Object(params));
            }
            ExitCode::SUCCESS
        }
    }
}

fn run_one(cfg: &ExperimentConfig, jobs: usize) -> ExitCode {
    let report = match run(cfg, jobs) {
        Ok(r) => r,
        Err(e @ RunError::Config(_)) => return config_error(e.kind(), e),
        Err(e) => {
            println!(
                "{}",
                json!({"error": {"kind": e.kind(), "message": e.to_string()}})
            );
            return ExitCode::from(1);
        }
    };
    let (csv, json_path) = match report.write(&cfg.out) {
        Ok(p) => p,
        Err(e) => return config_error("io", format!("{}: {e}", cfg.out.display())),
    };
    for c in &report.checks {
        println!(
            "{} {}",
            if c.pass { "ok  " } else { "FAIL" },
            verify::describe(c)
        );
    }
    println!("wrote {} and {}", csv.display(), json_path.display());
    eprintln!("wall time {:.3} s", report.wall_time.as_secs_f64());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

//! `thermacro`: run scenario files, verification suites, and print the
//! output schemas. Exit codes: 0 success, 2 failed assertion or suite,
//! 1 error.

mod config;
mod experiments;
mod record;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use thermacro::io::{self, TableKind};
use thermacro::verify::{run_suite, Scale, Suite, PINNED_SEED};

use config::{Mode, Overrides, ScenarioConfig, EXPERIMENTS};

/// Default output root when neither `--out` nor the config sets one.
const OUT_ENV: &str = "THERMACRO_OUT";

#[derive(Parser)]
#[command(name = "thermacro", version, about = "Thermodynamics of exchange economies: experiments and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; the run directory is created inside it.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Posted prices per leg for carnot, sweeps for everything else.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Run an acceptance suite with pinned seeds; prints a JSON report.
    Verify {
        #[arg(value_parser = Suite::NAMES)]
        suite: String,
        /// Also write the report and per-criterion tables under this root.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = PINNED_SEED)]
        seed: u64,
        /// Reduced sample sizes with unchanged thresholds.
        #[arg(long)]
        smoke: bool,
    },
    /// List the named experiments.
    ListExperiments,
    /// Print the CSV table schemas as JSON.
    Schema {
        /// A single table kind, e.g. `leg-trace`.
        kind: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, seed, out, replicas, mode, steps } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.apply(&Overrides { seed, mode, replicas, steps });
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let root = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
            let (rec, dir) = record::execute(&cfg, &base, &root)?;
            for w in &rec.warnings {
                log::warn!("{w}");
            }
            println!("{}", serde_json::to_string_pretty(&rec.metrics)?);
            eprintln!("{} -> {}", rec.run_id, dir.display());
            for a in rec.assertions.iter().filter(|a| !a.passed) {
                eprintln!("assertion failed: {} = {:?} outside [{:?}, {:?}]", a.metric, a.value, a.min, a.max);
            }
            Ok(status(rec.passed))
        }
        Command::Verify { suite, out, seed, smoke } => {
            let name = suite;
            let suite: Suite = name.parse()?;
            let scale = if smoke { Scale::Smoke } else { Scale::Full };
            let report = run_suite(suite, scale, seed);
            for o in &report.outcomes {
                eprintln!("{}", o.line());
            }
            if let Some(root) = out {
                let dir = root.join(format!("verify-{name}-{seed}"));
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for o in &report.outcomes {
                    if !o.tables.is_empty() {
                        let sub = dir.join(format!("criterion-{}", o.id));
                        std::fs::create_dir_all(&sub)?;
                        record::write_tables(&sub, &o.tables)?;
                    }
                }
                io::write_json(&dir.join("report.json"), &report)?;
                eprintln!("report -> {}", dir.display());
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(status(report.passed))
        }
        Command::ListExperiments => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<14} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Schema { kind } => {
            match kind {
                None => println!("{}", serde_json::to_string_pretty(io::schemas())?),
                Some(k) => {
                    let kind: TableKind = serde_json::from_value(serde_json::Value::String(k.clone()))
                        .map_err(|_| anyhow::anyhow!("unknown table kind {k:?}"))?;
                    println!("{}", serde_json::to_string_pretty(io::schema(kind))?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn status(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

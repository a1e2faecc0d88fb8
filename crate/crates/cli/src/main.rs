//! `fedmesh`: run, validate and generate simulator configurations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};

use fedmesh_core::config::{self, ConfigIssue, SimConfig};
use fedmesh_core::fl::{run_simulation, SimError};
use fedmesh_core::metrics::{render_metrics, summarize, write_metrics, MetricsFormat};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "fedmesh", version, about = "Peer-to-peer federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Print a JSON run summary (stdout with --out, stderr otherwise).
        #[arg(long)]
        summary: bool,
    },
    /// Parse and validate a config, listing every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a documented example config.
    GenConfig {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(config::PRESETS))]
        preset: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for MetricsFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => MetricsFormat::Csv,
            Format::Jsonl => MetricsFormat::Jsonl,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn load(path: &Path) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    config::parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn issues_text(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
            summary,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            info!("running {} with seed {}", config.display(), cfg.seed);
            let output = run_simulation(&cfg).map_err(|e| match e {
                SimError::Config(issues) => Failure::Config(format!("invalid configuration:\n{}", issues_text(&issues))),
                other => Failure::Runtime(other.to_string()),
            })?;
            let format = MetricsFormat::from(format);
            match &out {
                Some(path) => write_metrics(&output.log, path, format)
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{}", render_metrics(&output.log, format)),
            }
            if summary {
                let mut s = serde_json::to_value(summarize(&output.log)).expect("summary is serializable");
                s["stopped_early_after_round"] = serde_json::json!(output.stopped_early);
                s["events"] = serde_json::json!(output.events);
                let text = serde_json::to_string_pretty(&s).expect("summary is serializable");
                if out.is_some() {
                    println!("{text}");
                } else {
                    eprintln!("{text}");
                }
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            match config::validate(&cfg) {
                Ok(()) => {
                    println!("{}: ok", config.display());
                    Ok(())
                }
                Err(issues) => Err(Failure::Config(format!(
                    "{}: {} problem(s)\n{}",
                    config.display(),
                    issues.len(),
                    issues_text(&issues)
                ))),
            }
        }
        Command::GenConfig { preset } => {
            print!("{}", config::preset(&preset).expect("clap restricts preset names"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEDMESH_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            error!("configuration error");
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

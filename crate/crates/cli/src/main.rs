//! `igsfdr`: sweeps, optimization runs, throughput tables and the
//! acceptance suite for full-duplex relaying with improper signaling.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use igsfdr::validation::ValidationOptions;

use crate::commands::CliError;
use crate::config::{ConfigBuilder, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "igsfdr", version, about = "Outage, ergodic rate and signal design for full-duplex relaying with improper signaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file with `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one scenario key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// CSV output path; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Monte Carlo seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Monte Carlo sample count.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate metrics along one swept parameter.
    Sweep,
    /// Optimize relay power and circularity at one operating point.
    Optimize,
    /// Optimized FDR and Monte Carlo HDR throughput versus target rate.
    Throughput,
    /// Run the acceptance suite.
    Validate,
}

fn load(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut b = ConfigBuilder::new();
    if let Some(p) = &cli.config {
        b.apply_file(p)?;
    }
    for kv in &cli.set {
        b.apply_override(kv)?;
    }
    if let Some(s) = cli.seed {
        b.set_seed(s);
    }
    if let Some(n) = cli.samples {
        b.set_samples(n);
    }
    b.build()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError::Invalid("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Validate => {
            let mut opts = ValidationOptions::default();
            if let Some(s) = cli.seed {
                opts.seed = s;
            }
            if let Some(n) = cli.samples {
                opts.mc_samples = n;
            }
            commands::cmd_validate(&opts)
        }
        Command::Sweep => commands::cmd_sweep(&load(cli)?, out),
        Command::Optimize => commands::cmd_optimize(&load(cli)?, out),
        Command::Throughput => commands::cmd_throughput(&load(cli)?, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "prl",
    about = "Probabilistically robust learning experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the config (see README for per-experiment schemas).
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List available experiments.
    List,
    /// Run the quick cross-module property suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("PRL_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() -> Result<ExitCode> {
    init_thread_pool();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => {
            let summary = prl_cli::run_config_file(&config, seed, out)?;
            for check in &summary.checks {
                let tag = if check.passed { "pass" } else { "FAIL" };
                println!("[{tag}] {}: {} ({})", check.name, check.value, check.detail);
            }
            println!(
                "{}: {} ({} checks)",
                summary.experiment,
                if summary.passed { "PASS" } else { "FAIL" },
                summary.checks.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            for (name, description) in prl_cli::experiment_catalog() {
                println!("{name:<20} {description}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { seed } => {
            if prl_cli::selftest::run_selftest(seed) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

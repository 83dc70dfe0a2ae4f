use std::path::PathBuf;
use std::process::ExitCode;

use bpmd::harness::{self, summary::parse_targets, ExperimentConfig, RunOptions};
use bpmd::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bpmd", version, about = "Block policy mirror descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant and seed of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Worker threads (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Iterations to reach target gaps, median and IQR over seeds, as CSV on stdout.
    Summarize {
        #[arg(long)]
        records: String,
        #[arg(long, default_value = "0.1,0.01")]
        targets: String,
    },
    /// Write the configured environment as MDP JSON.
    ExportEnv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> bpmd::Result<()> {
    match cli.command {
        Command::Run { config, seed_offset, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let runs = harness::run_experiment(&cfg, &RunOptions { seed_offset, jobs })?;
            for r in runs {
                println!("{} seed {}: gap {:.6e} -> {:.6e} ({})", r.variant, r.seed, r.initial_gap, r.final_gap, r.csv_path.display());
            }
        }
        Command::Summarize { records, targets } => {
            let targets = parse_targets(&targets)?;
            let rows = harness::summarize(&records, &targets)?;
            harness::write_summary_csv(&rows, std::io::stdout().lock())?;
        }
        Command::ExportEnv { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            harness::export_env(&cfg, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else {
        3
    }
}

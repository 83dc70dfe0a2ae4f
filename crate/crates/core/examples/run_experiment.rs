//! A configured experiment run through the harness, then summarized.
//!
//! Pass a config path to run it instead of the bundled one.

use std::path::PathBuf;

use bpmd::harness::{run_experiment, summarize, write_summary_csv, ExperimentConfig, RunOptions};

fn main() -> bpmd::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/gridworld_small.json"));
    let mut cfg = ExperimentConfig::load(&path)?;
    let out = std::env::temp_dir().join("bpmd_example_records");
    cfg.output = out.clone();
    for run in run_experiment(&cfg, &RunOptions::default())? {
        println!("{} seed {}: gap {:.3e} -> {:.3e}", run.variant, run.seed, run.initial_gap, run.final_gap);
    }
    let rows = summarize(&format!("{}/*.csv", out.display()), &[0.1, 0.01])?;
    write_summary_csv(&rows, std::io::stdout().lock())
}

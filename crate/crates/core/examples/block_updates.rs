//! Updating several states per iteration; a block of every state is batch
//! policy mirror descent.

use bpmd::baseline::{run_batch_baseline, BatchMethod};
use bpmd::bpmd::{run_bpmd, BpmdSetup};
use bpmd::envs::{build_gridworld, GridWorldSpec};
use bpmd::oracle::solve_optimal;
use bpmd::rng::{stream, StreamTag};
use bpmd::sampling::SamplingScheme;
use bpmd::schedule::StepSchedule;
use bpmd::{BregmanKind, Policy, Regularizer};

fn main() -> bpmd::Result<()> {
    let world = build_gridworld(&GridWorldSpec::with_side(6, 2))?;
    let m = &world.mdp;
    let n = m.num_states();
    let reg = Regularizer::ScaledNegEntropy { tau: 0.05 };
    let opt = solve_optimal(m, &reg)?;
    let pi0 = Policy::uniform(n, m.num_actions());
    let schedule = StepSchedule::Constant { eta: 1.0 };
    for block in [1, 4, 12, n] {
        let mut setup = BpmdSetup::new(reg, BregmanKind::Kl, SamplingScheme::Uniform, schedule, (10 * n / block) as u64);
        setup.block_size = block;
        let out = run_bpmd(m, &opt, &setup, &pi0, stream(1, 0, StreamTag::StateSampling))?;
        let last = out.records.last().expect("records");
        println!("block {block:>3}: {} updates, gap {:.4e}", last.cumulative_updates, out.final_gap());
    }
    let batch = run_batch_baseline(m, &opt, &reg, BatchMethod::PmdConst, &schedule, &pi0, 10, None, false)?;
    println!("batch PMD:  {} updates, gap {:.4e}", batch.records.last().expect("records").cumulative_updates, batch.final_gap());
    Ok(())
}

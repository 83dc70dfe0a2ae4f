//! Batch policy mirror descent (geometric and constant stepsizes) and
//! projected policy gradient.

use bpmd::baseline::{run_batch_baseline, BatchMethod};
use bpmd::envs::{build_gridworld, GridWorldSpec};
use bpmd::oracle::solve_optimal;
use bpmd::{Policy, Regularizer};

fn main() -> bpmd::Result<()> {
    let world = build_gridworld(&GridWorldSpec::default())?;
    let m = &world.mdp;
    let opt = solve_optimal(m, &Regularizer::Zero)?;
    let pi0 = Policy::uniform(m.num_states(), m.num_actions());
    for method in [BatchMethod::PmdExp, BatchMethod::PmdConst, BatchMethod::Pg] {
        let schedule = method.default_schedule(m);
        let out = run_batch_baseline(m, &opt, &Regularizer::Zero, method, &schedule, &pi0, 60, None, false)?;
        let gaps = out.gaps();
        println!("{method:?}: gap after 10/30/60 iterations = {:.3e} / {:.3e} / {:.3e}", gaps[10], gaps[30], gaps[60]);
    }
    Ok(())
}

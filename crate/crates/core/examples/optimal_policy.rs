//! Solve a GridWorld exactly and measure optimality gaps against it.

use bpmd::envs::{build_gridworld, GridWorldSpec};
use bpmd::oracle::{objective_gap, policy_kl_potential, solve_optimal};
use bpmd::{Policy, Regularizer};

fn main() -> bpmd::Result<()> {
    let world = build_gridworld(&GridWorldSpec::default())?;
    let m = &world.mdp;
    for reg in [Regularizer::Zero, Regularizer::ScaledNegEntropy { tau: 0.1 }, Regularizer::SquaredL2 { tau: 0.1 }] {
        let opt = solve_optimal(m, &reg)?;
        let uniform = Policy::uniform(m.num_states(), m.num_actions());
        println!(
            "{reg:?}: {} sweeps, f(π*) = {:.4}, |supp ν*| = {}, gap(uniform) = {:.4}, KL potential(uniform) = {:.4}",
            opt.sweeps,
            opt.objective(),
            opt.support_star.len(),
            objective_gap(m, &reg, &uniform, &opt)?,
            policy_kl_potential(&uniform, &opt)?,
        );
    }
    Ok(())
}

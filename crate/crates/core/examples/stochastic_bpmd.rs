//! Stochastic BPMD with trajectory-based Q estimates, and the sample budgets
//! prescribed for a target accuracy.

use bpmd::envs::{build_gridworld, GridWorldSpec};
use bpmd::oracle::solve_optimal;
use bpmd::sampling::SamplingScheme;
use bpmd::sbpmd::{moment_bound, run_sbpmd, sample_budget, sample_budget_with_subgradient_bound, Regime, SbpmdSetup};
use bpmd::schedule::StepSchedule;
use bpmd::{Policy, Regularizer};

fn main() -> bpmd::Result<()> {
    let world = build_gridworld(&GridWorldSpec::with_side(5, 1))?;
    let m = &world.mdp;
    let (n, na) = (m.num_states(), m.num_actions());

    let nsc = sample_budget(Regime::Nsc, 0.05, m, &Regularizer::Zero)?;
    println!("budget for ε = 0.05 without regularization: k = {}, T = {}, samples = {:.3e}", nsc.iterations, nsc.horizon, nsc.total_samples(na));
    let tau = 0.1;
    let entropy = Regularizer::ScaledNegEntropy { tau };
    let ell = moment_bound(m, &entropy) + tau * ((na as f64).ln() + 1.0);
    let sc = sample_budget_with_subgradient_bound(Regime::Sc, 0.05, m, &entropy, ell)?;
    println!("budget for ε = 0.05 with entropy τ = {tau}: k = {}, T = {}", sc.iterations, sc.horizon);

    let opt = solve_optimal(m, &entropy)?;
    let iterations = 20_000;
    let setup = SbpmdSetup::new(entropy, SamplingScheme::Uniform, StepSchedule::stochastic_sc(n, tau)?, iterations, 40);
    for seed in 0..3 {
        let out = run_sbpmd(m, &opt, &setup, &Policy::uniform(n, na), seed, 0)?;
        println!(
            "seed {seed}: {} samples, gap {:.3} -> final {:.4}, random iterate {:.4}",
            out.records.last().expect("records").samples_used,
            out.initial_gap,
            out.final_gap(),
            out.random_iterate_gap()
        );
    }
    Ok(())
}

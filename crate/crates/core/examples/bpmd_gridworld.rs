//! Deterministic block policy mirror descent on a GridWorld with uniform,
//! ν* and hybrid sampling.

use bpmd::bpmd::{run_bpmd, BpmdSetup};
use bpmd::envs::{build_gridworld, GridWorldSpec};
use bpmd::oracle::solve_optimal;
use bpmd::rng::{stream, StreamTag};
use bpmd::sampling::{compute_diagnostics, hybrid_switch_point, SamplingScheme};
use bpmd::schedule::StepSchedule;
use bpmd::{BregmanKind, Policy, Regularizer};

fn main() -> bpmd::Result<()> {
    let world = build_gridworld(&GridWorldSpec::default())?;
    let m = &world.mdp;
    let (n, g) = (m.num_states(), m.discount());
    let opt = solve_optimal(m, &Regularizer::Zero)?;
    let head = compute_diagnostics(&opt.nu_star, &opt, 0.02);
    let k_tau = hybrid_switch_point(5.0, head.rho_dagger_head)?;
    let runs = [
        ("uniform", SamplingScheme::Uniform, StepSchedule::nsc_linear(1.0, g, 1.0 / n as f64)?),
        ("nu_star", SamplingScheme::NuStar, StepSchedule::nsc_linear(1.0, g, compute_diagnostics(&opt.nu_star, &opt, 0.02).rho_dagger)?),
        (
            "hybrid",
            SamplingScheme::Hybrid { rho: opt.nu_star.clone(), k_tau },
            StepSchedule::hybrid(1.0, g, head.rho_dagger_head, n, k_tau)?,
        ),
    ];
    for (name, scheme, schedule) in runs {
        let mut setup = BpmdSetup::new(Regularizer::Zero, BregmanKind::Kl, scheme, schedule, 20 * n as u64);
        setup.target_gap = Some(0.1);
        let out = run_bpmd(m, &opt, &setup, &Policy::uniform(n, m.num_actions()), stream(0, 0, StreamTag::StateSampling))?;
        match out.normalized_iterations_to(0.1) {
            Some(it) => println!("{name}: gap {:.3} -> {:.3e}, reached 0.1 after {it:.2} normalized iterations", out.initial_gap, out.final_gap()),
            None => println!("{name}: gap {:.3} -> {:.3e}, did not reach 0.1", out.initial_gap, out.final_gap()),
        }
    }
    Ok(())
}

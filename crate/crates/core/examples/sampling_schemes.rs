//! Sampling distributions, their head/tail diagnostics against ν*, and the
//! hybrid switch point.

use bpmd::envs::{build_gridworld, GridWorldSpec};
use bpmd::oracle::solve_optimal;
use bpmd::rng::{stream, StreamTag};
use bpmd::sampling::{build_random_surrogate, compute_diagnostics, hybrid_switch_point, Sampler, SamplingScheme};
use bpmd::{Policy, Regularizer};

fn main() -> bpmd::Result<()> {
    let world = build_gridworld(&GridWorldSpec::default())?;
    let m = &world.mdp;
    let n = m.num_states();
    let opt = solve_optimal(m, &Regularizer::Zero)?;
    let surrogate = build_random_surrogate(1, n)?;
    for (name, rho) in [("uniform", vec![1.0 / n as f64; n]), ("random", surrogate.to_vec()), ("nu_star", opt.nu_star.to_vec())] {
        let d = compute_diagnostics(&rho, &opt, 0.02);
        println!(
            "{name}: ρ† = {:.2e}, M = {:.3}, head ρ† = {:.3e}, tail ρ mass = {:.3}, tail ν* mass = {:.3}",
            d.rho_dagger, d.m_surrogate, d.rho_dagger_head, d.rho_tail_mass, d.nu_tail_mass
        );
    }
    let d = compute_diagnostics(&opt.nu_star, &opt, 0.02);
    let k_tau = hybrid_switch_point(5.0, d.rho_dagger_head)?;
    println!("hybrid switch point with α = 5: k_τ = {k_tau}");

    let scheme = SamplingScheme::Hybrid { rho: opt.nu_star.clone(), k_tau };
    let mut sampler = Sampler::new(&scheme, n, Some(&opt), stream(0, 0, StreamTag::StateSampling))?;
    let pi = Policy::uniform(n, m.num_actions());
    let early: Vec<usize> = (0..8).map(|k| sampler.sample(k, m, &pi)).collect::<bpmd::Result<_>>()?;
    let late: Vec<usize> = (0..8).map(|k| sampler.sample(k_tau + k, m, &pi)).collect::<bpmd::Result<_>>()?;
    println!("draws before the switch: {early:?}");
    println!("draws after the switch:  {late:?}");
    Ok(())
}

//! The three-state chain where on-policy sampling never leaves its start,
//! and the four-state instance where sampling from ν* is slower than uniform.

use bpmd::bpmd::{run_bpmd, BpmdSetup};
use bpmd::envs::{build_nustar_instance, build_onpolicy_hard_instance, ChainCosts, FourStateCosts};
use bpmd::oracle::solve_optimal;
use bpmd::rng::{stream, StreamTag};
use bpmd::sampling::SamplingScheme;
use bpmd::schedule::StepSchedule;
use bpmd::{BregmanKind, Regularizer};

fn main() -> bpmd::Result<()> {
    let (chain, pi0) = build_onpolicy_hard_instance(&ChainCosts::default())?;
    let opt = solve_optimal(&chain, &Regularizer::Zero)?;
    let setup = BpmdSetup::new(
        Regularizer::Zero,
        BregmanKind::SqEuclidean,
        SamplingScheme::OnPolicy { start_state: 0 },
        StepSchedule::Constant { eta: 1.0 },
        1000,
    );
    let out = run_bpmd(&chain, &opt, &setup, &pi0, stream(0, 0, StreamTag::StateSampling))?;
    println!("on-policy sampling: gap {:.4} -> {:.4} after 1000 iterations", out.initial_gap, out.final_gap());

    let (four, pi0) = build_nustar_instance(0.3, &FourStateCosts::default())?;
    let opt = solve_optimal(&four, &Regularizer::Zero)?;
    println!("ν* on the four-state instance: {:.4?}", opt.nu_star.probs());
    for (name, scheme) in [("uniform", SamplingScheme::Uniform), ("nu_star", SamplingScheme::NuStar)] {
        let seeds = 200;
        let mut mean = vec![0.0; 51];
        for seed in 0..seeds {
            let setup = BpmdSetup::new(Regularizer::Zero, BregmanKind::SqEuclidean, scheme.clone(), StepSchedule::Constant { eta: 0.002 }, 50);
            let gaps = run_bpmd(&four, &opt, &setup, &pi0, stream(seed, 0, StreamTag::StateSampling))?.gaps();
            mean.iter_mut().zip(&gaps).for_each(|(a, b)| *a += b / seeds as f64);
        }
        println!("{name}: mean gap at k = 0, 10, 50: {:.4} {:.4} {:.4}", mean[0], mean[10], mean[50]);
    }
    Ok(())
}

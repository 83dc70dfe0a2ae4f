use bpmd::envs::{build_gridworld, build_nustar_instance, build_onpolicy_hard_instance, random_mdp, ChainCosts, FourStateCosts, GridWorldSpec};
use bpmd::oracle::solve_optimal;
use bpmd::rng::{stream, StreamTag};
use bpmd::sampling::{build_random_surrogate, compute_diagnostics, head_set, hybrid_switch_point, Sampler, SamplingScheme};
use bpmd::{Policy, Regularizer, StateDistribution};

fn rng(seed: u64) -> bpmd::rng::StreamRng {
    stream(seed, 0, StreamTag::StateSampling)
}

#[test]
fn point_mass_always_draws_its_state() {
    let m = random_mdp(5, 2, 0.9, None, 1).unwrap();
    let pi = Policy::uniform(5, 2);
    let scheme = SamplingScheme::Static(StateDistribution::point_mass(5, 3).unwrap());
    let mut sampler = Sampler::new(&scheme, 5, None, rng(0)).unwrap();
    assert!((0..1000).all(|k| sampler.sample(k, &m, &pi).unwrap() == 3));
}

#[test]
fn uniform_counts_concentrate() {
    let n = 10;
    let m = random_mdp(n, 2, 0.9, None, 1).unwrap();
    let pi = Policy::uniform(n, 2);
    let mut sampler = Sampler::new(&SamplingScheme::Uniform, n, None, rng(1)).unwrap();
    let draws = 1_000_000;
    let mut counts = vec![0usize; n];
    for k in 0..draws {
        counts[sampler.sample(k, &m, &pi).unwrap()] += 1;
    }
    let (mean, sd) = (draws as f64 / n as f64, (draws as f64 * 0.1 * 0.9).sqrt());
    assert!(counts.iter().all(|&c| (c as f64 - mean).abs() <= 5.0 * sd), "{counts:?}");
}

#[test]
fn on_policy_sampling_stays_at_the_absorbing_start() {
    let (m, pi0) = build_onpolicy_hard_instance(&ChainCosts::default()).unwrap();
    let mut sampler = Sampler::new(&SamplingScheme::OnPolicy { start_state: 0 }, 3, None, rng(2)).unwrap();
    assert_eq!(sampler.distribution(0, &m, &pi0).unwrap(), vec![1.0, 0.0, 0.0]);
    assert!((0..200).all(|k| sampler.sample(k, &m, &pi0).unwrap() == 0));
}

#[test]
fn on_policy_law_is_positive_for_positive_chains() {
    let m = random_mdp(8, 3, 0.9, None, 5).unwrap();
    let pi = Policy::uniform(8, 3);
    let sampler = Sampler::new(&SamplingScheme::OnPolicy { start_state: 2 }, 8, None, rng(3)).unwrap();
    let rho = sampler.distribution(0, &m, &pi).unwrap();
    assert!(rho.iter().all(|&x| x > 0.0));
    assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn surrogate_distribution() {
    assert_eq!(build_random_surrogate(9, 1).unwrap().probs(), &[1.0]);
    let a = build_random_surrogate(1, 50).unwrap();
    assert!(a.iter().all(|&x| x > 0.0));
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(a, build_random_surrogate(1, 50).unwrap());
    assert_ne!(a, build_random_surrogate(2, 50).unwrap());
    assert!(build_random_surrogate(1, 0).is_err());
}

#[test]
fn switch_points() {
    assert_eq!(hybrid_switch_point(5.0, 0.05).unwrap(), 100);
    assert_eq!(hybrid_switch_point(15.0, 0.01).unwrap(), 1500);
    assert_eq!(hybrid_switch_point(1.0, 0.3).unwrap(), 4);
    assert!(hybrid_switch_point(0.0, 0.1).is_err());
    let w = build_gridworld(&GridWorldSpec::default()).unwrap();
    let opt = solve_optimal(&w.mdp, &Regularizer::Zero).unwrap();
    let rho = build_random_surrogate(3, 100).unwrap();
    let diag = compute_diagnostics(&rho, &opt, 0.2);
    let k_tau = hybrid_switch_point(5.0, diag.rho_dagger_head).unwrap();
    assert!(k_tau as f64 >= 5.0 / diag.rho_dagger_head - 1e-9);
    assert!((k_tau as f64) < 5.0 / diag.rho_dagger_head + 1.0);
}

#[test]
fn diagnostics() {
    let (m, _) = build_nustar_instance(0.2, &FourStateCosts::default()).unwrap();
    let opt = solve_optimal(&m, &Regularizer::Zero).unwrap();
    let own = compute_diagnostics(&opt.nu_star, &opt, 0.5);
    assert!((own.m_surrogate - 1.0).abs() < 1e-12 && own.exploratory);
    let uniform = compute_diagnostics(&[0.25; 4], &opt, 0.5);
    assert_eq!(uniform.rho_dagger, 0.25);
    assert!((uniform.m_surrogate - 4.0 / 2.2).abs() < 1e-12);
    let off = compute_diagnostics(&[0.0, 0.0, 0.0, 1.0], &opt, 0.25);
    assert!(!off.exploratory && off.m_surrogate.is_infinite());
    assert_eq!(head_set(&[0.1, 0.4, 0.1, 0.4], 0.5), vec![1, 3]);
    assert_eq!(head_set(&[0.1, 0.4, 0.1, 0.4], 0.0), vec![1]);
}

#[test]
fn hybrid_switches_to_uniform() {
    let m = random_mdp(4, 2, 0.9, None, 1).unwrap();
    let pi = Policy::uniform(4, 2);
    let rho = StateDistribution::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
    let scheme = SamplingScheme::Hybrid { rho: rho.clone(), k_tau: 10 };
    let mut sampler = Sampler::new(&scheme, 4, None, rng(4)).unwrap();
    assert_eq!(sampler.distribution(9, &m, &pi).unwrap(), rho.to_vec());
    assert_eq!(sampler.distribution(10, &m, &pi).unwrap(), vec![0.25; 4]);
    let draws = 200_000;
    let early = (0..draws).filter(|_| sampler.sample(0, &m, &pi).unwrap() == 0).count() as f64 / draws as f64;
    let late = (0..draws).filter(|_| sampler.sample(10, &m, &pi).unwrap() == 0).count() as f64 / draws as f64;
    assert!((early - 0.7).abs() < 0.01 && (late - 0.25).abs() < 0.01);
}

#[test]
fn blocks_are_distinct() {
    let m = random_mdp(6, 2, 0.9, None, 1).unwrap();
    let pi = Policy::uniform(6, 2);
    let mut sampler = Sampler::new(&SamplingScheme::Uniform, 6, None, rng(5)).unwrap();
    for k in 0..100 {
        let mut block = sampler.sample_block(k, &m, &pi, 4).unwrap();
        block.sort_unstable();
        block.dedup();
        assert_eq!(block.len(), 4);
    }
    assert!(sampler.sample_block(0, &m, &pi, 7).is_err());
    let point = SamplingScheme::Static(StateDistribution::point_mass(6, 0).unwrap());
    let mut narrow = Sampler::new(&point, 6, None, rng(6)).unwrap();
    assert!(narrow.sample_block(0, &m, &pi, 2).is_err());
}

#[test]
fn nu_star_scheme_needs_the_optimum() {
    assert!(Sampler::new(&SamplingScheme::NuStar, 4, None, rng(7)).is_err());
    assert!(Sampler::new(&SamplingScheme::OnPolicy { start_state: 4 }, 4, None, rng(7)).is_err());
}

#[test]
fn same_stream_same_draws() {
    let m = random_mdp(7, 2, 0.9, None, 1).unwrap();
    let pi = Policy::uniform(7, 2);
    let draw = || {
        let mut s = Sampler::new(&SamplingScheme::Uniform, 7, None, rng(8)).unwrap();
        (0..50).map(|k| s.sample(k, &m, &pi).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}

mod common;

use bpmd::envs::{build_gridworld, random_mdp, GridWorldSpec};
use bpmd::eval::{discounted_visitation, evaluate_direct, evaluate_incremental, stationary_distribution, EvalState};
use bpmd::{Mdp, Policy, Regularizer, StateDistribution};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn direct_matches_fixed_point_iteration() {
    let m = random_mdp(8, 3, 0.9, None, 12).unwrap();
    for (i, reg) in [Regularizer::Zero, Regularizer::ScaledNegEntropy { tau: 0.4 }, Regularizer::SquaredL2 { tau: 0.4 }]
        .iter()
        .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let pi = random_policy(&mut rng, 8, 3, 0.05);
        let (v, _, _) = evaluate_direct(&m, reg, &pi).unwrap();
        assert!(sup_diff(&v.0, &values_by_iteration(&m, reg, &pi)) <= 1e-9);
    }
}

#[test]
fn unchanged_policy_keeps_cache() {
    let m = random_mdp(5, 2, 0.9, None, 3).unwrap();
    let pi = Policy::uniform(5, 2);
    let (_, _, mut st) = evaluate_direct(&m, &Regularizer::Zero, &pi).unwrap();
    let (inv, v0) = (st.inverse().clone(), st.values().to_vec());
    let v = evaluate_incremental(&mut st, &m, &Regularizer::Zero, &pi, 2).unwrap();
    assert_eq!(v.0, v0);
    assert_eq!(st.inverse(), &inv);
}

#[test]
fn every_single_row_change_matches_direct() {
    let m = random_mdp(6, 3, 0.9, None, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for reg in [Regularizer::Zero, Regularizer::ScaledNegEntropy { tau: 0.2 }, Regularizer::SquaredL2 { tau: 0.2 }] {
        let pi = random_policy(&mut rng, 6, 3, 0.05);
        for s in 0..6 {
            let (_, _, mut st) = evaluate_direct(&m, &reg, &pi).unwrap();
            let mut next = pi.clone();
            next.set_row(s, &random_distribution(&mut rng, 3, 0.05)).unwrap();
            let v = evaluate_incremental(&mut st, &m, &reg, &next, s).unwrap();
            let (direct, _, _) = evaluate_direct(&m, &reg, &next).unwrap();
            assert!(sup_diff(&v.0, &direct.0) <= 1e-9);
        }
    }
}

#[test]
fn long_update_sequence_with_periodic_refresh() {
    let m = random_mdp(50, 4, 0.95, Some(5), 5).unwrap();
    let reg = Regularizer::SquaredL2 { tau: 0.1 };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut pi = Policy::uniform(50, 4);
    let mut st = EvalState::new(&m, &reg, &pi).unwrap();
    for i in 0..1500 {
        let s = rng.random_range(0..50);
        let row = random_distribution(&mut rng, 4, 0.0);
        pi.set_row(s, &row).unwrap();
        st.update_row_or_refresh(&m, &reg, s, &row).unwrap();
        if i % 100 == 99 {
            let (direct, _, _) = evaluate_direct(&m, &reg, &pi).unwrap();
            assert!(sup_diff(st.values(), &direct.0) <= 1e-8);
        }
    }
    assert!(st.updates_since_refresh() < 1000);
}

#[test]
fn doubly_stochastic_chain_has_uniform_law() {
    // Each action is a permutation, so every policy's kernel is doubly stochastic.
    let n = 4;
    let mut t = vec![0.0; n * 2 * n];
    for s in 0..n {
        t[(s * 2) * n + (s + 1) % n] = 1.0;
        t[(s * 2 + 1) * n + (s + 3) % n] = 1.0;
    }
    let m = Mdp::new(n, 2, 0.9, t, vec![0.0; 8]).unwrap();
    let nu = stationary_distribution(&m, &Policy::uniform(n, 2), &StateDistribution::uniform(n)).unwrap();
    assert!(nu.iter().all(|&x| (x - 0.25).abs() < 1e-12));
}

#[test]
fn gridworld_stationary_residual() {
    let w = build_gridworld(&GridWorldSpec::default()).unwrap();
    let m = &w.mdp;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pi = random_policy(&mut rng, 100, 4, 0.0);
    let nu = stationary_distribution(m, &pi, &StateDistribution::uniform(100)).unwrap();
    let p = m.policy_transition(&pi);
    let residual = (0..100)
        .map(|j| (nu[j] - (0..100).map(|i| nu[i] * p[i * 100 + j]).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    assert!(residual <= 1e-10);
    assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn visitation_limits() {
    let m = random_mdp(5, 2, 0.5, None, 6).unwrap();
    let tiny = Mdp::new(5, 2, 1e-9, m.transition_flat().to_vec(), m.cost_flat().to_vec()).unwrap();
    let d = discounted_visitation(&tiny, &Policy::uniform(5, 2), 3).unwrap();
    assert!((d[3] - 1.0).abs() < 1e-8);
    assert!(discounted_visitation(&m, &Policy::uniform(5, 2), 9).is_err());
}

#[test]
fn visitation_matches_truncated_series() {
    let m = random_mdp(6, 3, 0.9, None, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pi = random_policy(&mut rng, 6, 3, 0.0);
    let p = m.policy_transition(&pi);
    let g = m.discount();
    for s0 in 0..6 {
        let mut row = vec![0.0; 6];
        row[s0] = 1.0;
        let mut series = vec![0.0; 6];
        let mut w = 1.0 - g;
        for _ in 0..=2000 {
            series.iter_mut().zip(&row).for_each(|(a, b)| *a += w * b);
            row = (0..6).map(|j| (0..6).map(|i| row[i] * p[i * 6 + j]).sum()).collect();
            w *= g;
        }
        let d = discounted_visitation(&m, &pi, s0).unwrap();
        assert!(sup_diff(&d, &series) <= 1e-8);
    }
}

fn setup() -> impl Strategy<Value = (Mdp, Regularizer, Policy, Policy)> {
    (2usize..12, 2usize..5, 0.1f64..0.97, any::<u64>(), 0usize..3, 0.05f64..1.0).prop_map(|(n, na, g, seed, r, tau)| {
        let m = random_mdp(n, na, g, if seed % 2 == 0 { Some(2) } else { None }, seed).unwrap();
        let reg = match r {
            0 => Regularizer::Zero,
            1 => Regularizer::ScaledNegEntropy { tau },
            _ => Regularizer::SquaredL2 { tau },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let floor = if r == 1 { 0.05 } else { 0.0 };
        (m, reg, random_policy(&mut rng, n, na, floor), random_policy(&mut rng, n, na, floor))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn performance_difference((m, reg, pi, pi2) in setup()) {
        let (v, q, _) = evaluate_direct(&m, &reg, &pi).unwrap();
        let (v2, _, _) = evaluate_direct(&m, &reg, &pi2).unwrap();
        let (h, h2) = (reg.values_at_states(&pi), reg.values_at_states(&pi2));
        let g = m.discount();
        for s in 0..m.num_states() {
            let d = discounted_visitation(&m, &pi2, s).unwrap();
            let rhs: f64 = (0..m.num_states()).map(|t| {
                let inner: f64 = q.row(t).iter().zip(pi2.row(t).iter().zip(pi.row(t))).map(|(x, (a, b))| x * (a - b)).sum();
                d[t] * (inner + h2[t] - h[t])
            }).sum::<f64>() / (1.0 - g);
            prop_assert!((v2[s] - v[s] - rhs).abs() <= 1e-8);
        }
    }

    #[test]
    fn visitation_keeps_start_mass((m, _reg, pi, _) in setup()) {
        for s in 0..m.num_states() {
            let d = discounted_visitation(&m, &pi, s).unwrap();
            prop_assert!(d[s] >= 1.0 - m.discount() - 1e-12);
        }
    }

    #[test]
    fn stationary_law_mixes_visitations((m, _reg, pi, _) in setup()) {
        let n = m.num_states();
        let nu = stationary_distribution(&m, &pi, &StateDistribution::uniform(n)).unwrap();
        let mut mixed = vec![0.0; n];
        for s in 0..n {
            let d = discounted_visitation(&m, &pi, s).unwrap();
            mixed.iter_mut().zip(d.iter()).for_each(|(a, b)| *a += nu[s] * b);
        }
        prop_assert!(sup_diff(&mixed, &nu) <= 1e-8);
    }
}

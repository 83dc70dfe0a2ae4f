mod common;

use bpmd::prox::{bregman_divergence, project_simplex, prox_step, BregmanKind, SNAP_STEPSIZE};
use bpmd::Regularizer;
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn constant_q_keeps_base() {
    let base = [0.1, 0.2, 0.3, 0.4];
    for kind in [BregmanKind::Kl, BregmanKind::SqEuclidean] {
        let p = prox_step(kind, &Regularizer::Zero, &base, &[3.0; 4], 0.7).unwrap();
        assert!(sup_diff(&p, &base) <= 1e-15);
    }
}

#[test]
fn tiny_stepsize_keeps_base() {
    let base = [0.1, 0.2, 0.3, 0.4];
    let q = [1.0, -2.0, 0.5, 4.0];
    for (kind, reg) in [
        (BregmanKind::Kl, Regularizer::Zero),
        (BregmanKind::Kl, Regularizer::ScaledNegEntropy { tau: 1.0 }),
        (BregmanKind::Kl, Regularizer::SquaredL2 { tau: 1.0 }),
        (BregmanKind::SqEuclidean, Regularizer::Zero),
    ] {
        let p = prox_step(kind, &reg, &base, &q, 1e-15).unwrap();
        assert!(sup_diff(&p, &base) <= 1e-12, "{kind:?} {reg:?}");
    }
}

#[test]
fn two_action_softmax() {
    let p = prox_step(BregmanKind::Kl, &Regularizer::Zero, &[0.5, 0.5], &[0.0, 1.0], 1.0).unwrap();
    assert!((p[0] - 0.7311).abs() < 1e-4 && (p[1] - 0.2689).abs() < 1e-4);
    let e = std::f64::consts::E;
    assert!((p[0] - e / (1.0 + e)).abs() < 1e-15);
}

/// Two-action problems reduce to a scalar; scan it on a grid of step 1e-6.
#[test]
fn two_action_grid_search() {
    let cases = [
        (BregmanKind::Kl, Regularizer::Zero, [0.3, 0.7], [0.4, -0.2], 1.3),
        (BregmanKind::Kl, Regularizer::ScaledNegEntropy { tau: 0.5 }, [0.6, 0.4], [1.0, 0.0], 0.8),
        (BregmanKind::Kl, Regularizer::SquaredL2 { tau: 0.7 }, [0.2, 0.8], [0.0, 0.9], 2.0),
        (BregmanKind::SqEuclidean, Regularizer::Zero, [0.5, 0.5], [0.2, 0.1], 1.5),
    ];
    for (kind, reg, base, q, eta) in cases {
        let lib = prox_step(kind, &reg, &base, &q, eta).unwrap();
        let steps = 1_000_000;
        let best = (1..steps)
            .map(|i| i as f64 / steps as f64)
            .map(|x| (x, prox_objective(kind, &reg, &base, &q, eta, &[x, 1.0 - x])))
            .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        assert!((lib[0] - best.0).abs() <= 2e-6, "{kind:?} {reg:?}: {} vs {}", lib[0], best.0);
    }
}

#[test]
fn kl_keeps_support_and_snaps_to_argmin() {
    let p = prox_step(BregmanKind::Kl, &Regularizer::Zero, &[0.0, 0.5, 0.5], &[-5.0, 1.0, 2.0], 3.0).unwrap();
    assert_eq!(p[0], 0.0);
    let snapped = prox_step(BregmanKind::Kl, &Regularizer::Zero, &[0.2, 0.3, 0.5], &[1.0, 0.0, 2.0], SNAP_STEPSIZE).unwrap();
    assert_eq!(snapped, vec![0.0, 1.0, 0.0]);
}

#[test]
fn rejects_bad_inputs() {
    assert!(prox_step(BregmanKind::Kl, &Regularizer::Zero, &[0.5, 0.5], &[0.0], 1.0).is_err());
    assert!(prox_step(BregmanKind::Kl, &Regularizer::Zero, &[0.5, 0.5], &[0.0, 1.0], 0.0).is_err());
    assert!(prox_step(BregmanKind::Kl, &Regularizer::Zero, &[0.5, 0.6], &[0.0, 1.0], 1.0).is_err());
    assert!(prox_step(BregmanKind::SqEuclidean, &Regularizer::SquaredL2 { tau: 1.0 }, &[0.5, 0.5], &[0.0, 1.0], 1.0).is_err());
}

#[test]
fn divergences() {
    assert_eq!(bregman_divergence(BregmanKind::Kl, &[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    assert!((bregman_divergence(BregmanKind::Kl, &[1.0, 0.0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
    assert_eq!(bregman_divergence(BregmanKind::SqEuclidean, &[1.0, 0.0], &[0.0, 1.0]), 1.0);
}

fn case() -> impl Strategy<Value = (BregmanKind, Regularizer, Vec<f64>, Vec<f64>, f64, u64)> {
    (0usize..4, 2usize..7, 0.05f64..1.0, -3.0f64..0.5, any::<u64>()).prop_map(|(c, na, tau, log_eta, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (kind, reg) = match c {
            0 => (BregmanKind::Kl, Regularizer::Zero),
            1 => (BregmanKind::Kl, Regularizer::ScaledNegEntropy { tau }),
            2 => (BregmanKind::Kl, Regularizer::SquaredL2 { tau }),
            _ => (BregmanKind::SqEuclidean, Regularizer::Zero),
        };
        let base = random_distribution(&mut rng, na, if kind == BregmanKind::Kl { 0.05 } else { 0.0 });
        let q: Vec<f64> = (0..na).map(|_| rng.random_range(-2.0..2.0)).collect();
        (kind, reg, base, q, 10f64.powf(log_eta), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_matches_bisection(v in prop::collection::vec(-5.0f64..5.0, 1..10)) {
        prop_assert!(sup_diff(&project_simplex(&v), &project_simplex_bisect(&v)) <= 1e-10);
    }

    #[test]
    fn three_point_inequality((kind, reg, base, q, eta, seed) in case()) {
        let next = prox_step(kind, &reg, &base, &q, eta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let floor = if kind == BregmanKind::Kl { 0.01 } else { 0.0 };
        for _ in 0..4 {
            let p = random_distribution(&mut rng, base.len(), floor);
            let lin: f64 = q.iter().zip(next.iter().zip(&p)).map(|(a, (x, y))| a * (x - y)).sum();
            let lhs = eta * (lin + reg_value(&reg, &next) - reg_value(&reg, &p)) + divergence(kind, &next, &base);
            let rhs = divergence(kind, &p, &base) - (1.0 + eta * reg.modulus()) * divergence(kind, &p, &next);
            prop_assert!(lhs <= rhs + 1e-9, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn step_does_not_increase_linearized_objective((kind, reg, base, q, eta, _seed) in case()) {
        let next = prox_step(kind, &reg, &base, &q, eta).unwrap();
        let score = |p: &[f64]| q.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + reg_value(&reg, p);
        prop_assert!(score(&next) <= score(&base) + 1e-12);
    }

    #[test]
    fn matches_gradient_oracle((kind, reg, base, q, eta, _seed) in case()) {
        let next = prox_step(kind, &reg, &base, &q, eta).unwrap();
        let oracle = prox_oracle(kind, &reg, &base, &q, eta, 1e-11).expect("oracle converges");
        prop_assert!(sup_diff(&next, &oracle) <= 1e-6);
    }
}

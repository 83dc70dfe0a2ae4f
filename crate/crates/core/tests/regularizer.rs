mod common;

use bpmd::Regularizer;
use common::kl;
use proptest::prelude::*;

#[test]
fn values() {
    assert_eq!(Regularizer::Zero.value(&[0.2, 0.8]).unwrap(), 0.0);
    assert!(Regularizer::ScaledNegEntropy { tau: 1.0 }.value(&[0.25; 4]).unwrap().abs() < 1e-15);
    assert_eq!(Regularizer::SquaredL2 { tau: 1.0 }.value(&[0.0, 1.0, 0.0]).unwrap(), 1.0);
    assert!(Regularizer::Zero.value(&[0.5, 0.6]).is_err());
    assert!(Regularizer::SquaredL2 { tau: -1.0 }.check().is_err());
}

#[test]
fn subgradients() {
    assert_eq!(Regularizer::Zero.subgradient(&[0.3, 0.7]).unwrap(), vec![0.0, 0.0]);
    let g = Regularizer::SquaredL2 { tau: 0.5 }.subgradient(&[0.3, 0.7]).unwrap();
    assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.7).abs() < 1e-15);
}

/// Entropy gradient against central differences of `τ Σ p log p`.
#[test]
fn entropy_gradient_matches_finite_differences() {
    let tau = 0.7;
    let reg = Regularizer::ScaledNegEntropy { tau };
    let p = [0.1, 0.25, 0.3, 0.35];
    let g = reg.subgradient(&p).unwrap();
    let f = |x: &[f64]| tau * x.iter().map(|v| v * v.ln()).sum::<f64>();
    let h = 1e-6;
    for i in 0..p.len() {
        let (mut up, mut down) = (p, p);
        up[i] += h;
        down[i] -= h;
        let fd = (f(&up) - f(&down)) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-5, "coordinate {i}: {fd} vs {}", g[i]);
    }
}

fn interior(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], k).prop_map(move |mut w| {
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn reg_strategy() -> impl Strategy<Value = Regularizer> {
    prop_oneof![
        Just(Regularizer::Zero),
        (0.01f64..3.0).prop_map(|tau| Regularizer::ScaledNegEntropy { tau }),
        (0.01f64..3.0).prop_map(|tau| Regularizer::SquaredL2 { tau }),
    ]
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..9).prop_flat_map(|k| (interior(k), interior(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn modulus_inequality(reg in reg_strategy(), (p, q) in pair()) {
        let g = reg.subgradient(&q).unwrap();
        let lin: f64 = g.iter().zip(p.iter().zip(&q)).map(|(gi, (a, b))| gi * (a - b)).sum();
        let lhs = reg.value(&p).unwrap() - reg.value(&q).unwrap() - lin;
        prop_assert!(lhs >= reg.modulus() * kl(&p, &q) - 1e-9);
    }

    #[test]
    fn values_and_subgradients_are_bounded(reg in reg_strategy(), p in (2usize..9).prop_flat_map(simplex)) {
        let v = reg.value(&p).unwrap();
        prop_assert!(v >= -1e-12 && v <= reg.value_upper_bound(p.len()) + 1e-12);
        if let Ok(g) = reg.subgradient(&p) {
            let norm = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
            prop_assert!(norm <= reg.subgradient_bound() + 1e-9);
        }
    }
}

//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's prox, projection or estimator code.

#![allow(dead_code)]

use bpmd::prox::BregmanKind;
use bpmd::{Mdp, Policy, Regularizer};
use rand::Rng;

/// Euclidean projection onto the simplex by bisection on the threshold.
pub fn project_simplex_bisect(v: &[f64]) -> Vec<f64> {
    let mass = |theta: f64| v.iter().map(|x| (x - theta).max(0.0)).sum::<f64>();
    let hi0 = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (hi0 - 1.0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p: Vec<f64> = v.iter().map(|x| (x - 0.5 * (lo + hi)).max(0.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

/// Sort-based simplex projection, written out independently of the library.
pub fn project_simplex_sort(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&x, &y)| if x > 0.0 { if y > 0.0 { x * (x / y).ln() } else { f64::INFINITY } } else { 0.0 })
        .sum()
}

pub fn half_sq(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

pub fn divergence(kind: BregmanKind, p: &[f64], base: &[f64]) -> f64 {
    match kind {
        BregmanKind::Kl => kl(p, base),
        BregmanKind::SqEuclidean => half_sq(p, base),
    }
}

/// Regularizer value up to an additive constant (constants cancel in every use here).
pub fn reg_value(reg: &Regularizer, p: &[f64]) -> f64 {
    match *reg {
        Regularizer::Zero => 0.0,
        Regularizer::ScaledNegEntropy { tau } => tau * p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>(),
        Regularizer::SquaredL2 { tau } => tau * p.iter().map(|x| x * x).sum::<f64>(),
    }
}

/// Prox objective `η(⟨q,p⟩ + h(p)) + D(p, base)`.
pub fn prox_objective(kind: BregmanKind, reg: &Regularizer, base: &[f64], q: &[f64], eta: f64, p: &[f64]) -> f64 {
    let lin: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
    eta * (lin + reg_value(reg, p)) + divergence(kind, p, base)
}

fn prox_gradient(kind: BregmanKind, reg: &Regularizer, base: &[f64], q: &[f64], eta: f64, p: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let h = match *reg {
                Regularizer::Zero => 0.0,
                Regularizer::ScaledNegEntropy { tau } => tau * (p[i].ln() + 1.0),
                Regularizer::SquaredL2 { tau } => 2.0 * tau * p[i],
            };
            let d = match kind {
                BregmanKind::Kl => p[i].ln() - base[i].ln(),
                BregmanKind::SqEuclidean => p[i] - base[i],
            };
            eta * (q[i] + h) + d
        })
        .collect()
}

/// Accelerated projected gradient with backtracking and adaptive restart.
///
/// Stops once the gradient mapping is at most `tol` in sup-norm. For KL the
/// problem is solved on the support of `base`. Returns `None` if the
/// iteration cap is hit first.
pub fn prox_oracle(kind: BregmanKind, reg: &Regularizer, base: &[f64], q: &[f64], eta: f64, tol: f64) -> Option<Vec<f64>> {
    let support: Vec<usize> = match kind {
        BregmanKind::Kl => (0..base.len()).filter(|&i| base[i] > 0.0).collect(),
        BregmanKind::SqEuclidean => (0..base.len()).collect(),
    };
    let b: Vec<f64> = support.iter().map(|&i| base[i]).collect();
    let qs: Vec<f64> = support.iter().map(|&i| q[i]).collect();
    let interior = kind == BregmanKind::Kl || matches!(reg, Regularizer::ScaledNegEntropy { .. });
    let f = |p: &[f64]| prox_objective(kind, reg, &b, &qs, eta, p);
    let feasible = |p: &[f64]| !interior || p.iter().all(|&x| x > 0.0);
    let start = if interior { b.clone() } else { vec![1.0 / b.len() as f64; b.len()] };
    let (mut x, mut y, mut t, mut lip) = (start.clone(), start, 1.0f64, 1.0f64);
    let mut fx = f(&x);
    for _ in 0..5_000_000 {
        let g = prox_gradient(kind, reg, &b, &qs, eta, &y);
        let fy = f(&y);
        let z = loop {
            let trial: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lip).collect();
            let z = project_simplex_sort(&trial);
            if feasible(&z) {
                let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
                let model = fy
                    + g.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>()
                    + 0.5 * lip * diff.iter().map(|d| d * d).sum::<f64>();
                if f(&z) <= model + 1e-14 * fy.abs().max(1.0) {
                    break z;
                }
            }
            lip *= 2.0;
            if lip > 1e300 {
                return None;
            }
        };
        let mapping = z.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * lip;
        if mapping <= tol {
            let mut out = vec![0.0; base.len()];
            for (&i, &v) in support.iter().zip(&z) {
                out[i] = v;
            }
            return Some(out);
        }
        let fz = f(&z);
        if fz > fx && t > 1.0 {
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let ext: Vec<f64> = z.iter().zip(&x).map(|(zi, xi)| zi + beta * (zi - xi)).collect();
        y = if feasible(&ext) && ext.iter().all(|&v| v >= 0.0) { ext } else { z.clone() };
        x = z;
        fx = fz;
        t = t_next;
        lip *= 0.9;
    }
    None
}

/// Random distribution over `k` entries with every entry at least `floor / k`-ish.
pub fn random_distribution<R: Rng>(rng: &mut R, k: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + floor).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random policy; `floor > 0` keeps it strictly positive.
pub fn random_policy<R: Rng>(rng: &mut R, n: usize, na: usize, floor: f64) -> Policy {
    let table: Vec<f64> = (0..n).flat_map(|_| random_distribution(rng, na, floor)).collect();
    Policy::from_table(n, na, table).unwrap()
}

/// Per-state regularizer values `h^π(s)` with the library's normalization
/// (entropy is shifted by `τ log|A|`).
pub fn reg_at_states(reg: &Regularizer, pi: &Policy) -> Vec<f64> {
    let na = pi.num_actions() as f64;
    (0..pi.num_states())
        .map(|s| match *reg {
            Regularizer::ScaledNegEntropy { tau } => reg_value(reg, pi.row(s)) + tau * na.ln(),
            _ => reg_value(reg, pi.row(s)),
        })
        .collect()
}

/// Values by fixed-point iteration of the Bellman operator of `pi`, run to
/// machine precision.
pub fn values_by_iteration(m: &Mdp, reg: &Regularizer, pi: &Policy) -> Vec<f64> {
    let (n, na, g) = (m.num_states(), m.num_actions(), m.discount());
    let h = reg_at_states(reg, pi);
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        let cont: f64 = m.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                        pi.row(s)[a] * (m.cost(s, a) + h[s] + g * cont)
                    })
                    .sum()
            })
            .collect();
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff <= 1e-15 * v.iter().map(|x| x.abs()).fold(1.0, f64::max) {
            return v;
        }
    }
}

/// `Q̄_T(s,a)`: expected discounted cost of the first `T` steps, by backward recursion.
pub fn truncated_q(m: &Mdp, pi: &Policy, h: &[f64], horizon: usize) -> Vec<f64> {
    let (n, na, g) = (m.num_states(), m.num_actions(), m.discount());
    let mut q = vec![0.0; n * na];
    for _ in 0..horizon {
        let v: Vec<f64> = (0..n).map(|s| (0..na).map(|a| pi.row(s)[a] * q[s * na + a]).sum()).collect();
        q = (0..n * na)
            .map(|i| {
                let (s, a) = (i / na, i % na);
                let cont: f64 = m.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                m.cost(s, a) + h[s] + g * cont
            })
            .collect();
    }
    q
}

/// Exact mean of the length-`T` trajectory return from `(s, a)` by walking
/// every path of the trajectory tree.
pub fn tree_mean(m: &Mdp, pi: &Policy, h: &[f64], s: usize, a: usize, horizon: usize) -> f64 {
    fn walk(m: &Mdp, pi: &Policy, h: &[f64], s: usize, a: usize, depth: usize, horizon: usize, weight: f64, acc: f64) -> f64 {
        let total = acc + m.discount().powi(depth as i32) * (m.cost(s, a) + h[s]);
        if depth + 1 == horizon {
            return weight * total;
        }
        let mut out = 0.0;
        for (s2, &p) in m.transition_row(s, a).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (a2, &pa) in pi.row(s2).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                out += walk(m, pi, h, s2, a2, depth + 1, horizon, weight * p * pa, total);
            }
        }
        out
    }
    walk(m, pi, h, s, a, 0, horizon, 1.0, 0.0)
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

//! The single-state proximal step
//! `argmin_p η[⟨q, p⟩ + h(p)] + D(p‖base)` over the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::check_distribution;
use crate::regularizer::Regularizer;

/// Stepsizes at or above this take the analytic large-stepsize limit.
pub const SNAP_STEPSIZE: f64 = 1e12;
/// Two `q` entries within this distance of the minimum count as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Multiplier residual at which the KL/L2 dual solve stops.
pub const DUAL_TOL: f64 = 1e-12;
const DUAL_MAX_ITERS: usize = 200;

/// Distance generator of the Bregman divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BregmanKind {
    /// Negative entropy, giving the KL divergence.
    Kl,
    /// `½‖·‖²`, giving half the squared Euclidean distance.
    SqEuclidean,
}

/// `D(p‖base)` for the chosen generator.
///
/// KL is `+∞` when `p` puts mass where `base` has none.
pub fn bregman_divergence(kind: BregmanKind, p: &[f64], base: &[f64]) -> f64 {
    match kind {
        BregmanKind::Kl => {
            let mut acc = 0.0;
            for (&x, &b) in p.iter().zip(base) {
                if x > 0.0 {
                    if b <= 0.0 {
                        return f64::INFINITY;
                    }
                    acc += x * (x / b).ln();
                }
            }
            acc.max(0.0)
        }
        BregmanKind::SqEuclidean => 0.5 * p.iter().zip(base).map(|(x, b)| (x - b) * (x - b)).sum::<f64>(),
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut active = 0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
            active = j + 1;
        }
    }
    if active == 1 {
        // A vertex: return it exactly rather than `(x − θ)` with rounding.
        let top = v.iter().position(|&x| x == sorted[0]).unwrap_or(0);
        let mut out = vec![0.0; v.len()];
        out[top] = 1.0;
        return out;
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection onto the face of the simplex spanned by `support`.
fn project_on_support(v: &[f64], support: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..v.len()).filter(|&i| support[i]).collect();
    let sub: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
    let proj = project_simplex(&sub);
    let mut out = vec![0.0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        out[i] = proj[k];
    }
    out
}

/// Normalized `exp(logits)` over the support, computed with max subtraction.
fn softmax_on_support(logits: &[f64], support: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .zip(support)
        .map(|(&l, &s)| if s { (l - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

/// Base restricted to the near-minimizers of `q`, renormalized.
fn snap_to_argmin(base: &[f64], q: &[f64], support: &[bool]) -> Vec<f64> {
    let min = q
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .map(|(&x, _)| x)
        .fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = base
        .iter()
        .zip(q)
        .zip(support)
        .map(|((&b, &x), &s)| if s && x <= min + TIE_TOL { b } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

/// One mirror-descent proximal step at a single state.
///
/// `base` is the current action distribution and `q_row` the Q-values at
/// that state. The KL generator keeps the support of `base`.
pub fn prox_step(
    bregman: BregmanKind,
    reg: &Regularizer,
    base: &[f64],
    q_row: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    if base.len() != q_row.len() {
        return Err(Error::DimensionMismatch { expected: base.len(), found: q_row.len() });
    }
    check_distribution(base)?;
    if q_row.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("q row has non-finite entries".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("stepsize must be positive, got {eta}")));
    }
    let support: Vec<bool> = base.iter().map(|&b| b > 0.0).collect();
    // Every supported case is invariant to adding a constant to `q`, and
    // anchoring the minimum at zero keeps `η q` from swamping `log base`.
    let q_min = q_row
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|(&x, _)| x)
        .fold(f64::INFINITY, f64::min);
    let shifted_q: Vec<f64> = q_row.iter().map(|&x| x - q_min).collect();
    let q_row = &shifted_q[..];
    let snap = eta >= SNAP_STEPSIZE;
    match (bregman, *reg) {
        (BregmanKind::Kl, Regularizer::Zero) => {
            if snap {
                return Ok(snap_to_argmin(base, q_row, &support));
            }
            let logits = kl_logits(base, q_row, eta);
            Ok(softmax_on_support(&logits, &support))
        }
        (BregmanKind::Kl, Regularizer::ScaledNegEntropy { tau }) => {
            let logits: Vec<f64> = if snap {
                q_row.iter().map(|&x| -x / tau).collect()
            } else {
                let scale = 1.0 / (1.0 + eta * tau);
                kl_logits(base, q_row, eta).into_iter().map(|l| l * scale).collect()
            };
            Ok(softmax_on_support(&logits, &support))
        }
        (BregmanKind::Kl, Regularizer::SquaredL2 { tau }) => {
            if snap {
                let target: Vec<f64> = q_row.iter().map(|&x| -x / (2.0 * tau)).collect();
                return Ok(project_on_support(&target, &support));
            }
            kl_l2_prox(base, q_row, eta, tau, &support)
        }
        (BregmanKind::SqEuclidean, Regularizer::Zero) => {
            let shifted: Vec<f64> = base.iter().zip(q_row).map(|(b, x)| b - eta * x).collect();
            if shifted.iter().all(|x| x.is_finite()) {
                Ok(project_simplex(&shifted))
            } else {
                let all = vec![true; base.len()];
                let uniform = vec![1.0; base.len()];
                Ok(snap_to_argmin(&uniform, q_row, &all))
            }
        }
        (BregmanKind::SqEuclidean, r) => Err(Error::Unsupported(format!(
            "squared Euclidean Bregman with regularizer {r:?}"
        ))),
    }
}

fn kl_logits(base: &[f64], q: &[f64], eta: f64) -> Vec<f64> {
    base.iter()
        .zip(q)
        .map(|(&b, &x)| if b > 0.0 { b.ln() - eta * x } else { f64::NEG_INFINITY })
        .collect()
}

/// Solve `y + e^y = u` for `y`; then `e^y = W(e^u)`.
fn log_lambert_w_of_exp(u: f64) -> f64 {
    let mut y = if u > 1.0 { u.ln() } else { u };
    for _ in 0..100 {
        let ey = y.exp();
        let step = (ey + y - u) / (ey + 1.0);
        y -= step;
        if step.abs() <= 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    y
}

/// KL prox with `τ‖p‖²`: each coordinate satisfies
/// `log p − log b + η q + 2ητ p + λ = 0`, so `p = W(c e^{r−λ})/c` with
/// `c = 2ητ` and `r = log b − η q`. The multiplier `λ` is found by a
/// safeguarded Newton iteration inside a bisection bracket.
fn kl_l2_prox(base: &[f64], q: &[f64], eta: f64, tau: f64, support: &[bool]) -> Result<Vec<f64>> {
    let c = 2.0 * eta * tau;
    let mut r = kl_logits(base, q, eta);
    if !(c > f64::MIN_POSITIVE) {
        return Ok(softmax_on_support(&r, support));
    }
    let rmax = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    r.iter_mut().for_each(|x| *x -= rmax);
    let ln_c = c.ln();
    let n_support = support.iter().filter(|&&s| s).count() as f64;

    // Returns (Σp − 1, d/dλ Σp) and fills `p`.
    let eval = |lambda: f64, p: &mut [f64]| -> (f64, f64) {
        let mut sum = 0.0;
        let mut deriv = 0.0;
        for (i, &ri) in r.iter().enumerate() {
            if !support[i] {
                p[i] = 0.0;
                continue;
            }
            let w = log_lambert_w_of_exp(ln_c + ri - lambda).exp();
            p[i] = w / c;
            sum += p[i];
            deriv -= p[i] / (w + 1.0);
        }
        (sum - 1.0, deriv)
    };

    let mut p = vec![0.0; base.len()];
    // At `lo` the largest coordinate is at least one; at `hi` every one is at most 1/n.
    let mut lo = -c;
    let mut hi = n_support.ln();
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..DUAL_MAX_ITERS {
        let (f, df) = eval(lambda, &mut p);
        if f.abs() <= DUAL_TOL {
            let sum: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= sum);
            return Ok(p);
        }
        if f > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - f / df;
        lambda = if df < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::NoConvergence(format!(
        "KL/L2 prox multiplier search exceeded {DUAL_MAX_ITERS} iterations"
    )))
}

//! Stepsize schedules `η_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest stepsize ever returned; the prox step treats anything above its
/// snap threshold as the infinite-stepsize limit anyway.
pub const MAX_STEPSIZE: f64 = 1e300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `η_k = eta`.
    Constant { eta: f64 },
    /// `η_k = eta0 · ratio^k`.
    Exponential { eta0: f64, ratio: f64 },
    /// `η_k = scale / (k + 1)`.
    InverseTime { scale: f64 },
    /// `eta0 · ratio_before^k` up to `switch_at`, then growth by `ratio_after`.
    TwoPhase { eta0: f64, ratio_before: f64, ratio_after: f64, switch_at: usize },
}

impl StepSchedule {
    /// Constant stepsize `(1/γ − 1)/μ`, the smallest with `1 + ημ ≥ 1/γ`.
    pub fn sc_linear(mu: f64, discount: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter("strongly convex schedule needs a positive modulus".into()));
        }
        Ok(Self::Constant { eta: (1.0 / discount - 1.0) / mu })
    }

    /// `η_k = η_{k−1} / (1 − (1−γ)ρ†)` for static sampling with minimal frequency `rho_dagger`.
    pub fn nsc_linear(eta0: f64, discount: f64, rho_dagger: f64) -> Result<Self> {
        if !(rho_dagger > 0.0 && rho_dagger <= 1.0) {
            return Err(Error::InvalidParameter(format!("minimal state frequency {rho_dagger} outside (0, 1]")));
        }
        Ok(Self::Exponential { eta0, ratio: 1.0 / (1.0 - (1.0 - discount) * rho_dagger) })
    }

    /// `η_0 = 1`, `η_k = η_{k−1}/γ`, the batch method's linear-rate schedule.
    pub fn batch_exponential(discount: f64) -> Self {
        Self::Exponential { eta0: 1.0, ratio: 1.0 / discount }
    }

    /// Growth by `1/(1 − (1−γ)ρ†_H)` through `k_tau`, then by `1/(1 − (1−γ)/|S|)`.
    pub fn hybrid(eta0: f64, discount: f64, rho_dagger_head: f64, num_states: usize, k_tau: usize) -> Result<Self> {
        if !(rho_dagger_head > 0.0 && rho_dagger_head <= 1.0) {
            return Err(Error::InvalidParameter(format!("head frequency {rho_dagger_head} outside (0, 1]")));
        }
        Ok(Self::TwoPhase {
            eta0,
            ratio_before: 1.0 / (1.0 - (1.0 - discount) * rho_dagger_head),
            ratio_after: 1.0 / (1.0 - (1.0 - discount) / num_states as f64),
            switch_at: k_tau,
        })
    }

    /// `η_k = |S| / (μ (k+1))` for the stochastic method with a strongly convex regularizer.
    pub fn stochastic_sc(num_states: usize, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter("strongly convex schedule needs a positive modulus".into()));
        }
        Ok(Self::InverseTime { scale: num_states as f64 / mu })
    }

    /// `η = √(|S| log|A| / (k (M² + ℓ_h²)))` for a run of `iterations` stochastic steps.
    pub fn stochastic_nsc(
        num_states: usize,
        num_actions: usize,
        iterations: u64,
        moment_bound: f64,
        subgradient_bound: f64,
    ) -> Result<Self> {
        let denom = iterations as f64 * (moment_bound.powi(2) + subgradient_bound.powi(2));
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::InvalidParameter("stochastic schedule needs finite positive bounds".into()));
        }
        Ok(Self::Constant { eta: (num_states as f64 * (num_actions as f64).ln() / denom).sqrt() })
    }

    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { eta } => eta > 0.0,
            Self::Exponential { eta0, ratio } => eta0 > 0.0 && ratio > 0.0,
            Self::InverseTime { scale } => scale > 0.0,
            Self::TwoPhase { eta0, ratio_before, ratio_after, .. } => {
                eta0 > 0.0 && ratio_before > 0.0 && ratio_after > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid stepsize schedule {self:?}")))
        }
    }

    /// `η_k`, capped at [`MAX_STEPSIZE`].
    pub fn eta(&self, k: u64) -> f64 {
        let log_eta = match *self {
            Self::Constant { eta } => return eta.min(MAX_STEPSIZE),
            Self::InverseTime { scale } => return (scale / (k as f64 + 1.0)).min(MAX_STEPSIZE),
            Self::Exponential { eta0, ratio } => eta0.ln() + k as f64 * ratio.ln(),
            Self::TwoPhase { eta0, ratio_before, ratio_after, switch_at } => {
                let before = k.min(switch_at as u64) as f64;
                let after = k.saturating_sub(switch_at as u64) as f64;
                eta0.ln() + before * ratio_before.ln() + after * ratio_after.ln()
            }
        };
        if log_eta >= MAX_STEPSIZE.ln() {
            MAX_STEPSIZE
        } else {
            log_eta.exp()
        }
    }

    /// True when a constant stepsize satisfies `1 + ημ ≥ 1/γ`.
    pub fn satisfies_sc_linear(&self, mu: f64, discount: f64) -> bool {
        match *self {
            Self::Constant { eta } => 1.0 + eta * mu >= (1.0 / discount) * (1.0 - 1e-12),
            _ => false,
        }
    }
}

/// First `k ≥ 1` at which a stepsize/sampling sequence violates the
/// time-varying linear-rate condition
/// `1/η_{k−1} + μ ≥ (1/η_k + μ(1−ρ†_k)) · (ρ†_k/ρ†_{k−1}) · ‖ρ_{k−1}/ρ_k‖∞ / (1 − (1−γ)ρ†_k)`,
/// where `ρ†_k` is the minimum of `ρ_k` over `support` (the support of `ν*`).
///
/// With `μ = 0` this is the condition for the non-strongly-convex linear rate.
/// Returns `None` when the condition holds throughout.
pub fn first_stepsize_violation(
    etas: &[f64],
    rhos: &[Vec<f64>],
    support: &[usize],
    mu: f64,
    discount: f64,
) -> Result<Option<usize>> {
    if etas.len() != rhos.len() {
        return Err(Error::DimensionMismatch { expected: etas.len(), found: rhos.len() });
    }
    let dagger = |rho: &[f64]| support.iter().map(|&s| rho[s]).fold(f64::INFINITY, f64::min);
    for k in 1..etas.len() {
        let (prev, cur) = (&rhos[k - 1], &rhos[k]);
        let (dp, dc) = (dagger(prev), dagger(cur));
        if !(dp > 0.0 && dc > 0.0) {
            return Ok(Some(k));
        }
        let mut ratio: f64 = 0.0;
        for (a, b) in prev.iter().zip(cur) {
            if *a > 0.0 {
                if *b <= 0.0 {
                    return Ok(Some(k));
                }
                ratio = ratio.max(a / b);
            }
        }
        let lhs = 1.0 / etas[k - 1] + mu;
        let rhs = (1.0 / etas[k] + mu * (1.0 - dc)) * (dc / dp) * ratio / (1.0 - (1.0 - discount) * dc);
        if lhs < rhs * (1.0 - 1e-12) {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(StepSchedule::Constant { eta: 2.0 }.eta(7), 2.0);
        assert_eq!(StepSchedule::InverseTime { scale: 10.0 }.eta(4), 2.0);
        let e = StepSchedule::Exponential { eta0: 1.0, ratio: 2.0 };
        assert!((e.eta(10) - 1024.0).abs() < 1e-9);
        assert_eq!(e.eta(5000), MAX_STEPSIZE);
        let h = StepSchedule::TwoPhase { eta0: 1.0, ratio_before: 2.0, ratio_after: 3.0, switch_at: 2 };
        assert!((h.eta(2) - 4.0).abs() < 1e-12);
        assert!((h.eta(4) - 36.0).abs() < 1e-9);
    }

    #[test]
    fn sc_linear_meets_its_condition() {
        let s = StepSchedule::sc_linear(0.1, 0.9).unwrap();
        assert!(s.satisfies_sc_linear(0.1, 0.9));
        assert!(!StepSchedule::Constant { eta: 1.0 }.satisfies_sc_linear(0.1, 0.9));
        assert!(StepSchedule::sc_linear(0.0, 0.9).is_err());
    }

    #[test]
    fn static_sampling_conditions() {
        let rho = vec![vec![0.25; 4]; 5];
        let support = [0, 1, 2, 3];
        let constant = vec![(1.0 / 0.9 - 1.0) / 0.1; 5];
        assert_eq!(first_stepsize_violation(&constant, &rho, &support, 0.1, 0.9).unwrap(), None);
        let s = StepSchedule::nsc_linear(1.0, 0.9, 0.25).unwrap();
        let growing: Vec<f64> = (0..5).map(|k| s.eta(k)).collect();
        assert_eq!(first_stepsize_violation(&growing, &rho, &support, 0.0, 0.9).unwrap(), None);
        let flat = vec![1.0; 5];
        assert_eq!(first_stepsize_violation(&flat, &rho, &support, 0.0, 0.9).unwrap(), Some(1));
    }
}

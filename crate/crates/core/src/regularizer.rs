//! Convex per-state policy regularizers `h^π(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::check_distribution;

/// A convex penalty on one action distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "lowercase")]
pub enum Regularizer {
    Zero,
    /// `τ Σ p log p + τ log|A|`, shifted so uniform gives zero.
    #[serde(rename = "entropy")]
    ScaledNegEntropy { tau: f64 },
    /// `τ ‖p‖²`.
    #[serde(rename = "l2")]
    SquaredL2 { tau: f64 },
}

impl Regularizer {
    pub fn check(&self) -> Result<()> {
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::ScaledNegEntropy { tau } | Regularizer::SquaredL2 { tau } => {
                if tau > 0.0 && tau.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("regularizer weight must be positive, got {tau}")))
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    /// Strong-convexity modulus relative to KL.
    pub fn modulus(&self) -> f64 {
        match *self {
            Regularizer::ScaledNegEntropy { tau } => tau,
            _ => 0.0,
        }
    }

    /// Upper bound `h̄` on the value over the simplex.
    pub fn value_upper_bound(&self, num_actions: usize) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::ScaledNegEntropy { tau } => tau * (num_actions as f64).ln(),
            Regularizer::SquaredL2 { tau } => tau,
        }
    }

    /// Bound `ℓ_h` on the sup-norm of subgradients; infinite for entropy.
    pub fn subgradient_bound(&self) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::ScaledNegEntropy { .. } => f64::INFINITY,
            Regularizer::SquaredL2 { tau } => 2.0 * tau,
        }
    }

    /// Value at a distribution, checking it lies on the simplex.
    pub fn value(&self, dist: &[f64]) -> Result<f64> {
        check_distribution(dist)?;
        Ok(self.value_unchecked(dist))
    }

    /// Value without the simplex check, clamped into `[0, h̄]`.
    pub fn value_unchecked(&self, dist: &[f64]) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::ScaledNegEntropy { tau } => {
                let neg_ent: f64 = dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
                let bound = self.value_upper_bound(dist.len());
                (tau * neg_ent + bound).clamp(0.0, bound)
            }
            Regularizer::SquaredL2 { tau } => {
                (tau * dist.iter().map(|p| p * p).sum::<f64>()).clamp(0.0, tau)
            }
        }
    }

    /// A subgradient at `dist`. Entropy needs strictly positive entries.
    pub fn subgradient(&self, dist: &[f64]) -> Result<Vec<f64>> {
        check_distribution(dist)?;
        match *self {
            Regularizer::Zero => Ok(vec![0.0; dist.len()]),
            Regularizer::ScaledNegEntropy { tau } => {
                if let Some(i) = dist.iter().position(|&p| p <= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "entropy subgradient undefined at zero entry {i}"
                    )));
                }
                Ok(dist.iter().map(|p| tau * (p.ln() + 1.0)).collect())
            }
            Regularizer::SquaredL2 { tau } => Ok(dist.iter().map(|p| 2.0 * tau * p).collect()),
        }
    }

    /// `h(s)` for every state of a policy.
    pub fn values_at_states(&self, pi: &crate::mdp::Policy) -> Vec<f64> {
        (0..pi.num_states()).map(|s| self.value_unchecked(pi.row(s))).collect()
    }
}

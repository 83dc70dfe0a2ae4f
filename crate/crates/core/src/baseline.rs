//! Batch baselines that update every state each iteration: policy mirror
//! descent (KL, equivalently natural policy gradient) and projected policy
//! gradient.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalState;
use crate::mdp::{Mdp, Policy};
use crate::oracle::{gap_from_values, OptimalSolution};
use crate::prox::{project_simplex, prox_step, BregmanKind};
use crate::record::{RunOutput, RunRecord};
use crate::regularizer::Regularizer;
use crate::schedule::StepSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMethod {
    /// Mirror descent with geometrically growing stepsizes.
    PmdExp,
    /// Mirror descent with a constant stepsize.
    PmdConst,
    /// Projected gradient on the policy table.
    Pg,
}

impl BatchMethod {
    /// The schedule each method uses unless configured otherwise.
    pub fn default_schedule(&self, m: &Mdp) -> StepSchedule {
        let g = m.discount();
        match self {
            BatchMethod::PmdExp => StepSchedule::batch_exponential(g),
            BatchMethod::PmdConst => StepSchedule::Constant { eta: 1.0 },
            BatchMethod::Pg => StepSchedule::Constant { eta: default_pg_stepsize(g, m.num_actions()) },
        }
    }
}

/// `(1−γ)³ / (2γ|A|)`.
pub fn default_pg_stepsize(discount: f64, num_actions: usize) -> f64 {
    (1.0 - discount).powi(3) / (2.0 * discount * num_actions as f64)
}

/// One batch policy-gradient step on every row of `pi`.
///
/// The gradient of `f(π) = Σ ν*(s) V^π(s)` with respect to `π(a|s)` is
/// `w(s) (Q(s,a) + ∂h(s)_a)` with `w = ν*ᵀ(I − γP^π)^{-1}`.
pub fn pg_step(m: &Mdp, reg: &Regularizer, eval: &EvalState, nu: &[f64], eta: f64) -> Result<Policy> {
    let n = m.num_states();
    let inv = eval.inverse();
    let mut pi = eval.policy().clone();
    for s in 0..n {
        let w: f64 = inv.column(s).iter().zip(nu).map(|(a, b)| a * b).sum();
        let q = eval.q_row(m, s);
        let g = reg.subgradient(pi.row(s))?;
        let target: Vec<f64> = pi.row(s).iter().zip(q.iter().zip(&g)).map(|(p, (qa, ga))| p - eta * w * (qa + ga)).collect();
        pi.set_row(s, &project_simplex(&target))?;
    }
    Ok(pi)
}

/// Run a batch method for `iterations` iterations.
#[allow(clippy::too_many_arguments)]
pub fn run_batch_baseline(
    m: &Mdp,
    opt: &OptimalSolution,
    reg: &Regularizer,
    method: BatchMethod,
    schedule: &StepSchedule,
    pi0: &Policy,
    iterations: u64,
    target_gap: Option<f64>,
    timing: bool,
) -> Result<RunOutput> {
    reg.check()?;
    schedule.check()?;
    let n = m.num_states();
    if method == BatchMethod::Pg && matches!(reg, Regularizer::ScaledNegEntropy { .. }) {
        return Err(Error::Unsupported("projected gradient with the entropy regularizer".into()));
    }
    if method != BatchMethod::Pg && !pi0.is_strictly_positive() {
        return Err(Error::InvalidPolicy("KL updates need a strictly positive initial policy".into()));
    }
    let mut eval = EvalState::new(m, reg, pi0)?;
    let initial_gap = gap_from_values(eval.values(), opt);
    let all: Vec<usize> = (0..n).collect();
    let start = Instant::now();
    let mut records = Vec::new();
    if target_gap.is_none_or(|t| initial_gap > t) {
        for i in 1..=iterations {
            let eta = schedule.eta(i - 1);
            let next = match method {
                BatchMethod::Pg => pg_step(m, reg, &eval, &opt.nu_star, eta)?,
                BatchMethod::PmdExp | BatchMethod::PmdConst => {
                    let mut pi = eval.policy().clone();
                    for s in 0..n {
                        let q = eval.q_row(m, s);
                        pi.set_row(s, &prox_step(BregmanKind::Kl, reg, eval.policy().row(s), &q, eta)?)?;
                    }
                    pi
                }
            };
            eval = EvalState::new(m, reg, &next)?;
            let gap = gap_from_values(eval.values(), opt);
            records.push(RunRecord {
                k: i,
                updated_states: all.clone(),
                eta,
                gap,
                value_checksum: eval.values().iter().sum(),
                cumulative_updates: i * n as u64,
                samples_used: 0,
                elapsed_ns: if timing { start.elapsed().as_nanos() as u64 } else { 0 },
            });
            if target_gap.is_some_and(|t| gap <= t) {
                break;
            }
        }
    }
    Ok(RunOutput {
        num_states: n,
        initial_gap,
        records,
        final_policy: eval.policy().clone(),
        final_values: eval.values().to_vec(),
        mean_iterate_gap: None,
    })
}

//! Exact optimal policy, values and stationary distribution, used for gap
//! measurement and for sampling schemes that need `ν*`.

use crate::error::{Error, Result};
use crate::eval::{stationary_distribution, EvalState};
use crate::mdp::{Mdp, Policy, QFunction, StateDistribution, ValueFunction};
use crate::prox::{bregman_divergence, prox_step, BregmanKind, SNAP_STEPSIZE};
use crate::regularizer::Regularizer;

/// States with `ν*(s)` above this belong to the optimal support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Sweep cap for policy iteration.
pub const MAX_SWEEPS: usize = 10_000;
const VALUE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct OptimalSolution {
    pub pi_star: Policy,
    pub v_star: ValueFunction,
    pub q_star: QFunction,
    pub nu_star: StateDistribution,
    /// States with `ν*(s) > SUPPORT_THRESHOLD`, ascending.
    pub support_star: Vec<usize>,
    pub sweeps: usize,
}

impl OptimalSolution {
    /// `f(π*) = Σ ν*(s) V*(s)`.
    pub fn objective(&self) -> f64 {
        self.nu_star.iter().zip(self.v_star.iter()).map(|(n, v)| n * v).sum()
    }
}

/// Policy iteration (plain or regularized) followed by `ν*` from the uniform start.
pub fn solve_optimal(m: &Mdp, reg: &Regularizer) -> Result<OptimalSolution> {
    reg.check()?;
    let (pi, state, sweeps) = if reg.is_zero() {
        policy_iteration(m, reg)?
    } else {
        regularized_policy_iteration(m, reg)?
    };
    let nu = stationary_distribution(m, &pi, &StateDistribution::uniform(m.num_states()))?;
    let support = (0..m.num_states()).filter(|&s| nu[s] > SUPPORT_THRESHOLD).collect();
    Ok(OptimalSolution {
        q_star: state.q_function(m)?,
        v_star: ValueFunction(state.values().to_vec()),
        pi_star: pi,
        nu_star: nu,
        support_star: support,
        sweeps,
    })
}

fn policy_iteration(m: &Mdp, reg: &Regularizer) -> Result<(Policy, EvalState, usize)> {
    let n = m.num_states();
    let mut actions = vec![0usize; n];
    let mut pi = Policy::deterministic(m.num_actions(), &actions)?;
    for sweep in 1..=MAX_SWEEPS {
        let state = EvalState::new(m, reg, &pi)?;
        let mut changed = false;
        for s in 0..n {
            let q = state.q_row(m, s);
            let (best, min) = argmin(&q);
            // Keep the incumbent action unless another one is clearly better.
            if q[actions[s]] > min + 1e-12 * (1.0 + min.abs()) {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok((pi, state, sweep));
        }
        pi = Policy::deterministic(m.num_actions(), &actions)?;
    }
    Err(Error::NoConvergence(format!("policy iteration exceeded {MAX_SWEEPS} sweeps")))
}

fn regularized_policy_iteration(m: &Mdp, reg: &Regularizer) -> Result<(Policy, EvalState, usize)> {
    let n = m.num_states();
    let na = m.num_actions();
    let uniform = vec![1.0 / na as f64; na];
    let mut state = EvalState::new(m, reg, &Policy::uniform(n, na))?;
    for sweep in 1..=MAX_SWEEPS {
        let mut pi = state.policy().clone();
        for s in 0..n {
            let q = state.q_row(m, s);
            let row = prox_step(BregmanKind::Kl, reg, &uniform, &q, SNAP_STEPSIZE)?;
            pi.set_row(s, &row)?;
        }
        let next = EvalState::new(m, reg, &pi)?;
        let change = next
            .values()
            .iter()
            .zip(state.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        state = next;
        if change <= VALUE_TOL {
            return Ok((pi, state, sweep));
        }
    }
    Err(Error::NoConvergence(format!("regularized policy iteration exceeded {MAX_SWEEPS} sweeps")))
}

fn argmin(q: &[f64]) -> (usize, f64) {
    q.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
}

/// `Σ ν*(s)[V(s) − V*(s)]` for an already evaluated value vector.
pub fn gap_from_values(values: &[f64], opt: &OptimalSolution) -> f64 {
    opt.nu_star
        .iter()
        .zip(values)
        .zip(opt.v_star.iter())
        .map(|((n, v), vs)| n * (v - vs))
        .sum()
}

/// `f(π) − f(π*)` with `f(π) = E_{ν*}[V^π]`.
pub fn objective_gap(m: &Mdp, reg: &Regularizer, pi: &Policy, opt: &OptimalSolution) -> Result<f64> {
    let state = EvalState::new(m, reg, pi)?;
    Ok(gap_from_values(state.values(), opt))
}

/// `Σ_s ν*(s) KL(π*(·|s) ‖ π(·|s))`.
pub fn policy_kl_potential(pi: &Policy, opt: &OptimalSolution) -> Result<f64> {
    let mut total = 0.0;
    for &s in &opt.support_star {
        let d = bregman_divergence(BregmanKind::Kl, opt.pi_star.row(s), pi.row(s));
        if !d.is_finite() {
            return Err(Error::InvalidPolicy(format!(
                "policy has zero mass at state {s} where the optimal policy does not"
            )));
        }
        total += opt.nu_star[s] * d;
    }
    Ok(total)
}

//! Exact policy evaluation: direct LU solves, rank-1 inverse updates and
//! state-distribution computations.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::mdp::{q_from_v, Mdp, Policy, QFunction, StateDistribution, ValueFunction};
use crate::regularizer::Regularizer;

/// Rank-1 updates whose denominator falls below this are rejected.
pub const ILL_CONDITIONED_TOL: f64 = 1e-10;
/// A full direct solve replaces the cached inverse after this many rank-1 updates.
pub const REFRESH_INTERVAL: usize = 1000;
/// Stationarity residual accepted by [`stationary_distribution`].
pub const STATIONARY_TOL: f64 = 1e-10;

/// Cached quantities for a policy: `(I − γP^π)^{-1}`, `r^π`, `P^π` and `V^π`.
#[derive(Clone, Debug)]
pub struct EvalState {
    policy: Policy,
    inverse: DMatrix<f64>,
    p_pi: DMatrix<f64>,
    r_pi: Vec<f64>,
    reg_values: Vec<f64>,
    values: Vec<f64>,
    updates_since_refresh: usize,
    /// State whose row changed without the cache being refreshed yet.
    stale_state: Option<usize>,
}

fn policy_matrices(m: &Mdp, reg: &Regularizer, pi: &Policy) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = m.num_states();
    let p = DMatrix::from_row_slice(n, n, &m.policy_transition(pi));
    let reg_values = reg.values_at_states(pi);
    let r = (0..n).map(|s| reward_row(m, pi.row(s), reg_values[s], s)).collect();
    (p, r, reg_values)
}

#[inline]
fn reward_row(m: &Mdp, dist: &[f64], h: f64, s: usize) -> f64 {
    m.cost_row(s).iter().zip(dist).map(|(c, p)| (c + h) * p).sum()
}

fn check_shapes(m: &Mdp, pi: &Policy) -> Result<()> {
    if pi.num_states() != m.num_states() {
        return Err(Error::DimensionMismatch { expected: m.num_states(), found: pi.num_states() });
    }
    if pi.num_actions() != m.num_actions() {
        return Err(Error::DimensionMismatch { expected: m.num_actions(), found: pi.num_actions() });
    }
    Ok(())
}

/// Solve `(I − γP^π)V = r^π` and build the full cache.
pub fn evaluate_direct(m: &Mdp, reg: &Regularizer, pi: &Policy) -> Result<(ValueFunction, QFunction, EvalState)> {
    let state = EvalState::new(m, reg, pi)?;
    let q = state.q_function(m)?;
    Ok((ValueFunction(state.values.clone()), q, state))
}

/// Update the cache after `pi_new` changed only row `changed_state`.
///
/// Returns [`Error::IllConditioned`] without touching the cache when the
/// rank-1 denominator is too small; callers then fall back to
/// [`evaluate_direct`].
pub fn evaluate_incremental(
    state: &mut EvalState,
    m: &Mdp,
    reg: &Regularizer,
    pi_new: &Policy,
    changed_state: usize,
) -> Result<ValueFunction> {
    check_shapes(m, pi_new)?;
    state.update_row(m, reg, changed_state, pi_new.row(changed_state))?;
    Ok(ValueFunction(state.values.clone()))
}

impl EvalState {
    /// Evaluate `pi` by a direct LU solve.
    pub fn new(m: &Mdp, reg: &Regularizer, pi: &Policy) -> Result<Self> {
        check_shapes(m, pi)?;
        let (p_pi, r_pi, reg_values) = policy_matrices(m, reg, pi);
        let (inverse, values) = direct_solve(m.discount(), &p_pi, &r_pi)?;
        Ok(Self {
            policy: pi.clone(),
            inverse,
            p_pi,
            r_pi,
            reg_values,
            values,
            updates_since_refresh: 0,
            stale_state: None,
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `h^π(s)` for every state.
    pub fn reg_values(&self) -> &[f64] {
        &self.reg_values
    }

    pub fn r_pi(&self) -> &[f64] {
        &self.r_pi
    }

    pub fn p_pi(&self) -> &DMatrix<f64> {
        &self.p_pi
    }

    /// Cached `(I − γP^π)^{-1}`.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn stale_state(&self) -> Option<usize> {
        self.stale_state
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    /// Q-values at one state from the cached `V`.
    pub fn q_row(&self, m: &Mdp, s: usize) -> Vec<f64> {
        let g = m.discount();
        (0..m.num_actions())
            .map(|a| {
                let cont: f64 = m.transition_row(s, a).iter().zip(&self.values).map(|(p, v)| p * v).sum();
                m.cost(s, a) + self.reg_values[s] + g * cont
            })
            .collect()
    }

    pub fn q_function(&self, m: &Mdp) -> Result<QFunction> {
        q_from_v(m, &self.reg_values, &self.values)
    }

    /// Recompute everything from the cached policy by a direct solve.
    pub fn refresh(&mut self, m: &Mdp, reg: &Regularizer) -> Result<()> {
        *self = Self::new(m, reg, &self.policy)?;
        Ok(())
    }

    /// Replace row `s` of the policy and update the inverse by the rank-1
    /// formula `A⁻¹ + γ (A⁻¹e_s)(Δᵀ A⁻¹) / (1 − γ Δᵀ A⁻¹ e_s)`.
    pub fn update_row(&mut self, m: &Mdp, reg: &Regularizer, s: usize, new_row: &[f64]) -> Result<()> {
        let n = m.num_states();
        if s >= n {
            return Err(Error::StateOutOfRange { index: s, num_states: n });
        }
        if new_row.len() != m.num_actions() {
            return Err(Error::DimensionMismatch { expected: m.num_actions(), found: new_row.len() });
        }
        if self.policy.row(s) == new_row {
            self.stale_state = None;
            return Ok(());
        }
        let g = m.discount();
        let mut new_p = vec![0.0; n];
        m.policy_transition_row(s, new_row, &mut new_p);
        let delta: Vec<f64> = (0..n).map(|j| new_p[j] - self.p_pi[(s, j)]).collect();

        if delta.iter().any(|&d| d != 0.0) {
            // Δᵀ A⁻¹ as a row vector.
            let dt_inv: Vec<f64> = (0..n)
                .map(|j| self.inverse.column(j).iter().zip(&delta).map(|(a, d)| a * d).sum())
                .collect();
            let denom = 1.0 - g * dt_inv[s];
            if denom.abs() < ILL_CONDITIONED_TOL {
                self.stale_state = Some(s);
                return Err(Error::IllConditioned { denominator: denom });
            }
            let col: Vec<f64> = (0..n).map(|i| self.inverse[(i, s)]).collect();
            let scale = g / denom;
            // nalgebra storage is column-major, so sweep columns in the outer loop.
            for j in 0..n {
                let f = scale * dt_inv[j];
                if f == 0.0 {
                    continue;
                }
                let column = self.inverse.column_mut(j);
                for (x, c) in column.into_iter().zip(&col) {
                    *x += c * f;
                }
            }
            for j in 0..n {
                self.p_pi[(s, j)] = new_p[j];
            }
            self.updates_since_refresh += 1;
        }

        self.policy.set_row(s, new_row)?;
        self.reg_values[s] = reg.value_unchecked(new_row);
        self.r_pi[s] = reward_row(m, new_row, self.reg_values[s], s);
        self.stale_state = None;

        if self.updates_since_refresh >= REFRESH_INTERVAL {
            self.refresh(m, reg)?;
        } else {
            self.recompute_values();
        }
        Ok(())
    }

    /// Replace several rows at once. Falls back to a direct solve when the
    /// block is large or a rank-1 step is ill-conditioned.
    pub fn update_rows(&mut self, m: &Mdp, reg: &Regularizer, rows: &[(usize, Vec<f64>)]) -> Result<()> {
        // B rank-1 updates cost O(B|S|²); a direct solve costs O(|S|³).
        if rows.len() * 3 >= m.num_states() {
            let mut pi = self.policy.clone();
            for (s, row) in rows {
                pi.set_row(*s, row)?;
            }
            *self = Self::new(m, reg, &pi)?;
            return Ok(());
        }
        for (s, row) in rows {
            self.update_row_or_refresh(m, reg, *s, row)?;
        }
        Ok(())
    }

    /// [`update_row`](Self::update_row) with the direct-solve fallback.
    pub fn update_row_or_refresh(&mut self, m: &Mdp, reg: &Regularizer, s: usize, row: &[f64]) -> Result<()> {
        match self.update_row(m, reg, s, row) {
            Err(Error::IllConditioned { .. }) => {
                let mut pi = self.policy.clone();
                pi.set_row(s, row)?;
                *self = Self::new(m, reg, &pi)?;
                Ok(())
            }
            other => other,
        }
    }

    fn recompute_values(&mut self) {
        let n = self.r_pi.len();
        let mut v = vec![0.0; n];
        for (j, &r) in self.r_pi.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for (x, a) in v.iter_mut().zip(self.inverse.column(j).iter()) {
                *x += a * r;
            }
        }
        self.values = v;
    }
}

fn direct_solve(g: f64, p_pi: &DMatrix<f64>, r: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = p_pi.nrows();
    let a = DMatrix::<f64>::identity(n, n) - p_pi * g;
    let lu = a.lu();
    let rhs = nalgebra::DVector::from_column_slice(r);
    let v = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("LU solve failed for I − γP^π".into()))?;
    let inverse = lu
        .try_inverse()
        .ok_or_else(|| Error::Singular("cannot invert I − γP^π".into()))?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("non-finite values".into()));
    }
    Ok((inverse, v.iter().cloned().collect()))
}

/// Cesàro limit of `start·(P^π)^k`.
pub fn stationary_distribution(m: &Mdp, pi: &Policy, start: &StateDistribution) -> Result<StateDistribution> {
    check_shapes(m, pi)?;
    if start.len() != m.num_states() {
        return Err(Error::DimensionMismatch { expected: m.num_states(), found: start.len() });
    }
    stationary_from_kernel(&m.policy_transition(pi), start)
}

/// Stationary distribution for a dense row-major kernel.
///
/// Computes the Cesàro limit exactly: the chain is split into communicating
/// classes, each closed class gets its own stationary law from a direct
/// solve, and these are mixed by the probability of being absorbed into each
/// class from `start`. The result is checked against `‖x − xP‖∞ ≤ 1e-10`.
pub fn stationary_from_kernel(kernel: &[f64], start: &[f64]) -> Result<StateDistribution> {
    let n = start.len();
    if kernel.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: kernel.len() });
    }
    let p = |i: usize, j: usize| kernel[i * n + j];

    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p(i, j) > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let classes = tarjan_scc(&graph);
    let mut class_of = vec![0; n];
    for (c, members) in classes.iter().enumerate() {
        for v in members {
            class_of[v.index()] = c;
        }
    }
    let closed: Vec<bool> = classes
        .iter()
        .enumerate()
        .map(|(c, members)| members.iter().all(|v| (0..n).all(|j| p(v.index(), j) == 0.0 || class_of[j] == c)))
        .collect();

    // Expected visits to transient states before absorption.
    let transient: Vec<usize> = (0..n).filter(|&s| !closed[class_of[s]]).collect();
    let mut mass = vec![0.0; classes.len()];
    for s in 0..n {
        if closed[class_of[s]] {
            mass[class_of[s]] += start[s];
        }
    }
    if !transient.is_empty() {
        let t = transient.len();
        let a = DMatrix::from_fn(t, t, |i, j| f64::from(u8::from(i == j)) - p(transient[j], transient[i]));
        let rhs = nalgebra::DVector::from_iterator(t, transient.iter().map(|&s| start[s]));
        let visits = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("transient visit solve failed".into()))?;
        for (i, &s) in transient.iter().enumerate() {
            for j in 0..n {
                if closed[class_of[j]] {
                    mass[class_of[j]] += visits[i] * p(s, j);
                }
            }
        }
    }

    let mut x = vec![0.0; n];
    for (c, members) in classes.iter().enumerate() {
        if !closed[c] || mass[c] <= 0.0 {
            continue;
        }
        let idx: Vec<usize> = members.iter().map(|v| v.index()).collect();
        let k = idx.len();
        // (I − P_CC)ᵀ π = 0 with the last equation replaced by Σπ = 1.
        let mut a = DMatrix::from_fn(k, k, |i, j| f64::from(u8::from(i == j)) - p(idx[j], idx[i]));
        a.row_mut(k - 1).fill(1.0);
        let mut rhs = nalgebra::DVector::zeros(k);
        rhs[k - 1] = 1.0;
        let local = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("closed-class stationary solve failed".into()))?;
        for (i, &s) in idx.iter().enumerate() {
            x[s] = mass[c] * local[i].max(0.0);
        }
    }
    let sum: f64 = x.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Singular("stationary distribution has no mass".into()));
    }
    x.iter_mut().for_each(|v| *v /= sum);

    let residual = (0..n)
        .map(|j| (x[j] - (0..n).map(|i| x[i] * p(i, j)).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    if residual > STATIONARY_TOL {
        return Err(Error::NoConvergence(format!("stationary distribution residual {residual:e}")));
    }
    Ok(StateDistribution::from_vec_unchecked(x))
}

/// `d^π_{s0} = (1−γ) e_{s0}ᵀ (I − γP^π)^{-1}`.
pub fn discounted_visitation(m: &Mdp, pi: &Policy, s0: usize) -> Result<StateDistribution> {
    check_shapes(m, pi)?;
    let n = m.num_states();
    if s0 >= n {
        return Err(Error::StateOutOfRange { index: s0, num_states: n });
    }
    let g = m.discount();
    let p = DMatrix::from_row_slice(n, n, &m.policy_transition(pi));
    let at = (DMatrix::<f64>::identity(n, n) - p * g).transpose();
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[s0] = 1.0 - g;
    let d = at
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("visitation solve failed".into()))?;
    let mut d: Vec<f64> = d.iter().map(|x| x.max(0.0)).collect();
    let sum: f64 = d.iter().sum();
    d.iter_mut().for_each(|x| *x /= sum);
    Ok(StateDistribution::from_vec_unchecked(d))
}

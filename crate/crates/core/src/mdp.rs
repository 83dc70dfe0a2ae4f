//! Core domain types: MDPs, policies, value objects and their validation.

use std::fmt;
use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for every row-sum check.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite discounted MDP with dense transition tensor and cost table.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    /// Row-major `[s][a][s']`.
    transition: Vec<f64>,
    /// Row-major `[s][a]`.
    cost: Vec<f64>,
    cost_upper_bound: f64,
    cost_lower_bound: f64,
}

/// One invariant violation found by [`validate_mdp`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    RowSum { state: usize, action: usize, sum: f64 },
    NegativeProbability { state: usize, action: usize, next: usize, value: f64 },
    NonFinite { what: &'static str, state: usize, action: usize },
    CostOutOfBounds { state: usize, action: usize, cost: f64 },
    Discount(f64),
    CostBounds { lower: f64, upper: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}")
            }
            Violation::NegativeProbability { state, action, next, value } => write!(
                f,
                "negative probability {value} at (s={state}, a={action}, s'={next})"
            ),
            Violation::NonFinite { what, state, action } => {
                write!(f, "non-finite {what} at (s={state}, a={action})")
            }
            Violation::CostOutOfBounds { state, action, cost } => {
                write!(f, "cost {cost} at (s={state}, a={action}) outside declared bounds")
            }
            Violation::Discount(g) => write!(f, "discount {g} not in (0, 1)"),
            Violation::CostBounds { lower, upper } => {
                write!(f, "cost bounds [{lower}, {upper}] are not a valid nonnegative range")
            }
        }
    }
}

/// Result of [`validate_mdp`]: empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl Mdp {
    /// Build an MDP and reject it unless every invariant holds.
    ///
    /// The cost bounds default to `[0, max c]`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        transition: Vec<f64>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        let m = Self::new_unchecked(num_states, num_actions, discount, transition, cost)?;
        m.validated()
    }

    /// Build an MDP checking only shapes. Use [`validate_mdp`] for the rest.
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        transition: Vec<f64>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        let expected = num_states * num_actions * num_states;
        if transition.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: transition.len() });
        }
        if cost.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch {
                expected: num_states * num_actions,
                found: cost.len(),
            });
        }
        let upper = cost.iter().cloned().fold(0.0_f64, f64::max);
        Ok(Self {
            num_states,
            num_actions,
            discount,
            transition,
            cost,
            cost_upper_bound: upper,
            cost_lower_bound: 0.0,
        })
    }

    /// Consume `self`, returning it only if [`validate_mdp`] reports no violations.
    pub fn validated(self) -> Result<Self> {
        let report = validate_mdp(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidMdp(report.to_string()))
        }
    }

    /// Declare a larger cost upper bound `c̄` than the observed maximum.
    pub fn with_cost_upper_bound(mut self, bound: f64) -> Result<Self> {
        let max = self.cost.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(bound >= max) || !bound.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cost upper bound {bound} is below the largest cost {max}"
            )));
        }
        self.cost_upper_bound = bound;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn cost_upper_bound(&self) -> f64 {
        self.cost_upper_bound
    }

    pub fn cost_lower_bound(&self) -> f64 {
        self.cost_lower_bound
    }

    /// Next-state distribution `P(·|s,a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.transition[start..start + n]
    }

    #[inline]
    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.num_actions + a]
    }

    /// Cost row `c(s,·)`.
    #[inline]
    pub fn cost_row(&self, s: usize) -> &[f64] {
        &self.cost[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn transition_flat(&self) -> &[f64] {
        &self.transition
    }

    pub fn cost_flat(&self) -> &[f64] {
        &self.cost
    }

    /// Policy-averaged kernel row `P^π(s,·)` written into `out`.
    pub fn policy_transition_row(&self, s: usize, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (a, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.transition_row(s, a)) {
                *o += w * p;
            }
        }
    }

    /// Dense row-major `P^π`.
    pub fn policy_transition(&self, pi: &Policy) -> Vec<f64> {
        let n = self.num_states;
        let mut out = vec![0.0; n * n];
        for s in 0..n {
            self.policy_transition_row(s, pi.row(s), &mut out[s * n..(s + 1) * n]);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MdpJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: MdpJson = serde_json::from_str(text)?;
        wire.try_into()
    }
}

/// Check every [`Mdp`] invariant and list all violations with their indices.
pub fn validate_mdp(m: &Mdp) -> ValidationReport {
    let mut violations = Vec::new();
    if !(m.discount > 0.0 && m.discount < 1.0) {
        violations.push(Violation::Discount(m.discount));
    }
    if !(m.cost_lower_bound >= 0.0 && m.cost_upper_bound >= m.cost_lower_bound)
        || !m.cost_upper_bound.is_finite()
    {
        violations.push(Violation::CostBounds { lower: m.cost_lower_bound, upper: m.cost_upper_bound });
    }
    for s in 0..m.num_states {
        for a in 0..m.num_actions {
            let row = m.transition_row(s, a);
            let mut sum = 0.0;
            let mut finite = true;
            for (next, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    finite = false;
                } else if p < 0.0 {
                    violations.push(Violation::NegativeProbability { state: s, action: a, next, value: p });
                }
                sum += p;
            }
            if !finite {
                violations.push(Violation::NonFinite { what: "transition", state: s, action: a });
            } else if (sum - 1.0).abs() > STOCHASTIC_TOL {
                violations.push(Violation::RowSum { state: s, action: a, sum });
            }
            let c = m.cost(s, a);
            if !c.is_finite() {
                violations.push(Violation::NonFinite { what: "cost", state: s, action: a });
            } else if c < m.cost_lower_bound || c > m.cost_upper_bound {
                violations.push(Violation::CostOutOfBounds { state: s, action: a, cost: c });
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpJson {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transition: Vec<Vec<Vec<f64>>>,
    cost: Vec<Vec<f64>>,
    /// Declared `c̄`, present only when it exceeds the largest cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_upper_bound: Option<f64>,
}

impl From<&Mdp> for MdpJson {
    fn from(m: &Mdp) -> Self {
        let transition = (0..m.num_states)
            .map(|s| (0..m.num_actions).map(|a| m.transition_row(s, a).to_vec()).collect())
            .collect();
        let cost = (0..m.num_states).map(|s| m.cost_row(s).to_vec()).collect();
        let max = m.cost.iter().cloned().fold(0.0_f64, f64::max);
        Self {
            num_states: m.num_states,
            num_actions: m.num_actions,
            discount: m.discount,
            transition,
            cost,
            cost_upper_bound: (m.cost_upper_bound > max).then_some(m.cost_upper_bound),
        }
    }
}

impl TryFrom<MdpJson> for Mdp {
    type Error = Error;

    fn try_from(w: MdpJson) -> Result<Self> {
        let (n, na) = (w.num_states, w.num_actions);
        if w.transition.len() != n || w.cost.len() != n {
            return Err(Error::InvalidMdp("outer array length differs from num_states".into()));
        }
        let mut transition = Vec::with_capacity(n * na * n);
        for (s, rows) in w.transition.into_iter().enumerate() {
            if rows.len() != na {
                return Err(Error::InvalidMdp(format!("state {s} has {} action rows", rows.len())));
            }
            for (a, row) in rows.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::InvalidMdp(format!("row (s={s}, a={a}) has length {}", row.len())));
                }
                transition.extend(row);
            }
        }
        let mut cost = Vec::with_capacity(n * na);
        for (s, row) in w.cost.into_iter().enumerate() {
            if row.len() != na {
                return Err(Error::InvalidMdp(format!("cost row {s} has length {}", row.len())));
            }
            cost.extend(row);
        }
        let m = Mdp::new(n, na, w.discount, transition, cost)?;
        match w.cost_upper_bound {
            Some(bound) => m.with_cost_upper_bound(bound),
            None => Ok(m),
        }
    }
}

impl Serialize for Mdp {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        MdpJson::from(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Mdp {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let wire = MdpJson::deserialize(de)?;
        Mdp::try_from(wire).map_err(serde::de::Error::custom)
    }
}

/// Row-stochastic `|S|×|A|` policy table.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    table: Vec<f64>,
}

impl Policy {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            table: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Deterministic policy taking `actions[s]` at every state.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut table = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!("action {a} at state {s} out of range")));
            }
            table[s * num_actions + a] = 1.0;
        }
        Ok(Self { num_states: actions.len(), num_actions, table })
    }

    /// Build from a flat row-major table, checking every row is a distribution.
    pub fn from_table(num_states: usize, num_actions: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch { expected: num_states * num_actions, found: table.len() });
        }
        let pi = Self { num_states, num_actions, table };
        pi.check()?;
        Ok(pi)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let na = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != na) {
            return Err(Error::InvalidPolicy("ragged rows".into()));
        }
        Self::from_table(rows.len(), na, rows.concat())
    }

    fn check(&self) -> Result<()> {
        for s in 0..self.num_states {
            check_distribution(self.row(s))
                .map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.table[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Replace one row. The new row must be a distribution.
    pub fn set_row(&mut self, s: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.num_actions {
            return Err(Error::DimensionMismatch { expected: self.num_actions, found: row.len() });
        }
        check_distribution(row).map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        self.table[s * self.num_actions..(s + 1) * self.num_actions].copy_from_slice(row);
        Ok(())
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// True when every entry of every row is strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.table.iter().all(|&p| p > 0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyJson {
    num_states: usize,
    num_actions: usize,
    table: Vec<Vec<f64>>,
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        PolicyJson {
            num_states: self.num_states,
            num_actions: self.num_actions,
            table: (0..self.num_states).map(|s| self.row(s).to_vec()).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let w = PolicyJson::deserialize(de)?;
        if w.table.len() != w.num_states || w.table.iter().any(|r| r.len() != w.num_actions) {
            return Err(serde::de::Error::custom("policy table shape disagrees with declared sizes"));
        }
        Policy::from_table(w.num_states, w.num_actions, w.table.concat()).map_err(serde::de::Error::custom)
    }
}

/// Check that `p` is nonnegative and sums to one within [`STOCHASTIC_TOL`].
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NotADistribution("empty vector".into()));
    }
    if let Some(i) = p.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::NotADistribution(format!("entry {i} is {}", p[i])));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotADistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// State values `V(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction(pub Vec<f64>);

impl Deref for ValueFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// State-action values, row-major `[s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction {
    num_actions: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch { expected: num_states * num_actions, found: values.len() });
        }
        Ok(Self { num_actions, values })
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Index<(usize, usize)> for QFunction {
    type Output = f64;
    fn index(&self, (s, a): (usize, usize)) -> &f64 {
        &self.values[s * self.num_actions + a]
    }
}

/// A probability vector over states.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDistribution(Vec<f64>);

impl StateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(&probs)?;
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, s: usize) -> Result<Self> {
        if s >= n {
            return Err(Error::StateOutOfRange { index: s, num_states: n });
        }
        let mut v = vec![0.0; n];
        v[s] = 1.0;
        Ok(Self(v))
    }

    /// Divide a nonnegative vector by its sum.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::NotADistribution("weights must be nonnegative with positive sum".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self(weights))
    }

    pub(crate) fn from_vec_unchecked(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateDistribution {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `Q(s,a) = c(s,a) + h(s) + γ Σ P(s'|s,a) v(s')`.
pub fn q_from_v(m: &Mdp, reg_at_states: &[f64], v: &[f64]) -> Result<QFunction> {
    let n = m.num_states();
    for len in [reg_at_states.len(), v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let na = m.num_actions();
    let g = m.discount();
    let mut q = Vec::with_capacity(n * na);
    for s in 0..n {
        for a in 0..na {
            let cont: f64 = m.transition_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
            q.push(m.cost(s, a) + reg_at_states[s] + g * cont);
        }
    }
    QFunction::new(n, na, q)
}

/// `max_s |v(s) − ⟨q(s,·), π(·|s)⟩|`.
pub fn value_q_consistency(pi: &Policy, v: &[f64], q: &QFunction) -> f64 {
    (0..pi.num_states())
        .map(|s| {
            let avg: f64 = q.row(s).iter().zip(pi.row(s)).map(|(x, p)| x * p).sum();
            (v[s] - avg).abs()
        })
        .fold(0.0, f64::max)
}

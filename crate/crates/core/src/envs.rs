//! Benchmark environments: random GridWorlds, the three-state chain where
//! on-policy sampling gets stuck, and the four-state instance where
//! sampling from `ν*` is slower than uniform sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};
use crate::rng::{substream, StreamTag};

/// Kind of a GridWorld cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Goal,
    Trap,
    Regular,
    Block,
}

/// Type fractions `(goal, trap, regular, block)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellFractions {
    pub goal: f64,
    pub trap: f64,
    pub regular: f64,
    pub block: f64,
}

/// Cell costs before the nonnegativity shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellCosts {
    pub goal: f64,
    pub regular: f64,
    pub trap: f64,
}

/// Where goal and trap cells send the agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResetTarget {
    /// The regular cell with the smallest state index.
    #[default]
    LowestRegular,
    /// A fixed state, which must be a regular cell.
    State(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridWorldSpec {
    /// Grid side length; the grid has `side²` states.
    pub side: usize,
    /// Probability that the chosen direction is followed before the uniform slip.
    pub slip: f64,
    pub fractions: CellFractions,
    pub costs: CellCosts,
    pub discount: f64,
    pub reset: ResetTarget,
    pub seed: u64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        Self {
            side: 10,
            slip: 0.7,
            fractions: CellFractions { goal: 0.05, trap: 0.05, regular: 0.8, block: 0.1 },
            costs: CellCosts { goal: -0.1, regular: 0.0, trap: 10.0 },
            discount: 0.9,
            reset: ResetTarget::LowestRegular,
            seed: 0,
        }
    }
}

impl GridWorldSpec {
    pub fn with_side(side: usize, seed: u64) -> Self {
        Self { side, seed, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        let f = &self.fractions;
        let parts = [f.goal, f.trap, f.regular, f.block];
        if parts.iter().any(|x| !(*x >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("cell fractions must be nonnegative and sum to 1".into()));
        }
        let c = &self.costs;
        if !(c.goal < c.regular && c.regular < c.trap) {
            return Err(Error::InvalidParameter("costs must satisfy goal < regular < trap".into()));
        }
        if self.side == 0 {
            return Err(Error::InvalidParameter("grid side must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::InvalidParameter(format!("slip probability {} outside [0, 1]", self.slip)));
        }
        Ok(())
    }
}

/// A generated GridWorld with its layout.
#[derive(Clone, Debug)]
pub struct GridWorld {
    pub mdp: Mdp,
    pub cells: Vec<CellKind>,
    pub reset_state: usize,
    /// Constant added to every cost so that all costs are nonnegative.
    pub cost_shift: f64,
}

/// Moves: up, down, left, right.
const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Build a GridWorld.
///
/// Each action picks a direction; the agent follows it with probability
/// `slip` and otherwise a uniformly random direction, so the intended move
/// has probability `slip + (1−slip)/4`. Moves into blocks or off the grid
/// leave the agent in place. Goal and trap cells move deterministically
/// to the reset cell. The cost of `(s, a)` is the expected cost of the
/// landing cell, shifted so the smallest cell cost is zero.
pub fn build_gridworld(spec: &GridWorldSpec) -> Result<GridWorld> {
    spec.check()?;
    let d = spec.side;
    let n = d * d;
    let f = &spec.fractions;
    let n_goal = (f.goal * n as f64).round() as usize;
    let n_trap = (f.trap * n as f64).round() as usize;
    let n_block = (f.block * n as f64).round() as usize;
    if n_goal + n_trap + n_block >= n {
        return Err(Error::InvalidParameter("no regular cell left for the reset target".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(spec.seed, 0, StreamTag::Environment, 0, 0));
    let mut cells = vec![CellKind::Regular; n];
    for (rank, &cell) in order.iter().enumerate() {
        cells[cell] = if rank < n_goal {
            CellKind::Goal
        } else if rank < n_goal + n_trap {
            CellKind::Trap
        } else if rank < n_goal + n_trap + n_block {
            CellKind::Block
        } else {
            CellKind::Regular
        };
    }
    let reset_state = match spec.reset {
        ResetTarget::LowestRegular => cells.iter().position(|&c| c == CellKind::Regular),
        ResetTarget::State(s) => (s < n && cells[s] == CellKind::Regular).then_some(s),
    }
    .ok_or_else(|| Error::InvalidParameter("reset target is not a regular cell".into()))?;

    let c = &spec.costs;
    let shift = -c.goal.min(c.regular).min(c.trap).min(0.0);
    let cell_cost = |kind: CellKind| match kind {
        CellKind::Goal => c.goal + shift,
        CellKind::Trap => c.trap + shift,
        CellKind::Regular | CellKind::Block => c.regular + shift,
    };

    let na = MOVES.len();
    let mut transition = vec![0.0; n * na * n];
    let mut cost = vec![0.0; n * na];
    let target = |s: usize, dir: usize| -> usize {
        let (r, col) = ((s / d) as isize, (s % d) as isize);
        let (nr, nc) = (r + MOVES[dir].0, col + MOVES[dir].1);
        if nr < 0 || nc < 0 || nr >= d as isize || nc >= d as isize {
            return s;
        }
        let t = nr as usize * d + nc as usize;
        if cells[t] == CellKind::Block {
            s
        } else {
            t
        }
    };
    for s in 0..n {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * n..(s * na + a + 1) * n];
            match cells[s] {
                CellKind::Goal | CellKind::Trap => row[reset_state] = 1.0,
                CellKind::Block => row[s] = 1.0,
                CellKind::Regular => {
                    for dir in 0..na {
                        let mut p = (1.0 - spec.slip) / na as f64;
                        if dir == a {
                            p += spec.slip;
                        }
                        row[target(s, dir)] += p;
                    }
                }
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
            cost[s * na + a] = row
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(t, &p)| p * cell_cost(cells[t]))
                .sum::<f64>()
                .max(0.0);
        }
    }
    let upper = c.trap + shift;
    let mdp = Mdp::new(n, na, spec.discount, transition, cost)?.with_cost_upper_bound(upper)?;
    Ok(GridWorld { mdp, cells, reset_state, cost_shift: shift })
}

/// Arc costs of the three-state chain `A – B – C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainCosts {
    /// Staying at `A` by moving left.
    pub a_left: f64,
    /// Any move between neighbouring states.
    pub step: f64,
    /// Staying at `C` by moving right.
    pub c_right: f64,
    pub discount: f64,
}

impl Default for ChainCosts {
    fn default() -> Self {
        Self { a_left: 0.5, step: 1.0, c_right: 0.0, discount: 0.9 }
    }
}

/// Action indices of the two-action instances.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Three-state chain `A(0) – B(1) – C(2)` with actions left/right.
///
/// `A` loops on itself when moving left, `C` loops on itself when moving
/// right. Always moving right is optimal, yet the initial policy that always
/// moves left at `A` never leaves `A`, so on-policy sampling only ever sees
/// `A` and `Q(A, left) < Q(A, right)` keeps the policy there.
pub fn build_onpolicy_hard_instance(costs: &ChainCosts) -> Result<(Mdp, Policy)> {
    let ChainCosts { a_left, step, c_right, discount } = *costs;
    if !(c_right < a_left && a_left < step) {
        return Err(Error::InvalidParameter("chain costs must satisfy c_right < a_left < step".into()));
    }
    let n = 3;
    let mut transition = vec![0.0; n * 2 * n];
    let mut set = |s: usize, a: usize, t: usize| transition[(s * 2 + a) * n + t] = 1.0;
    set(0, LEFT, 0);
    set(0, RIGHT, 1);
    set(1, LEFT, 0);
    set(1, RIGHT, 2);
    set(2, LEFT, 1);
    set(2, RIGHT, 2);
    let cost = vec![a_left, step, step, step, step, c_right];
    let mdp = Mdp::new(n, 2, discount, transition, cost)?;
    let pi0 = Policy::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]])?;
    Ok((mdp, pi0))
}

/// Costs of the four-state instance; left moves are free, right moves cost `right`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourStateCosts {
    pub right: f64,
    pub discount: f64,
}

impl Default for FourStateCosts {
    fn default() -> Self {
        Self { right: 1.0, discount: 0.9 }
    }
}

/// Four states `A(0), B(1), C(2), D(3)`.
///
/// `A` moves to `B`; from `B` either action reaches `C` with probability
/// `p` and `A` otherwise; `C` moves left to `A` or right to `D`; `D` moves
/// left to `C` or stays. Left is free and optimal everywhere. The initial
/// policy is optimal except at `C`, where it is uniform.
pub fn build_nustar_instance(p: f64, costs: &FourStateCosts) -> Result<(Mdp, Policy)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("transition probability {p} outside (0, 1)")));
    }
    if !(costs.right > 0.0) {
        return Err(Error::InvalidParameter("right-move cost must be positive".into()));
    }
    let n = 4;
    let mut transition = vec![0.0; n * 2 * n];
    let mut set = |s: usize, a: usize, t: usize, w: f64| transition[(s * 2 + a) * n + t] += w;
    set(0, LEFT, 1, 1.0);
    set(0, RIGHT, 1, 1.0);
    for a in [LEFT, RIGHT] {
        set(1, a, 2, p);
        set(1, a, 0, 1.0 - p);
    }
    set(2, LEFT, 0, 1.0);
    set(2, RIGHT, 3, 1.0);
    set(3, LEFT, 2, 1.0);
    set(3, RIGHT, 3, 1.0);
    let r = costs.right;
    let cost = vec![0.0, r, 0.0, r, 0.0, r, 0.0, r];
    let mdp = Mdp::new(n, 2, costs.discount, transition, cost)?;
    let pi0 = Policy::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.5], vec![1.0, 0.0]])?;
    Ok((mdp, pi0))
}

/// Dense random MDP with rows drawn uniformly then normalized and costs in `[0, 1)`.
///
/// With `branching = Some(b)` each row has at most `b` nonzero entries.
pub fn random_mdp(
    num_states: usize,
    num_actions: usize,
    discount: f64,
    branching: Option<usize>,
    seed: u64,
) -> Result<Mdp> {
    let mut rng = substream(seed, 0, StreamTag::Environment, 1, 0);
    let n = num_states;
    let mut transition = vec![0.0; n * num_actions * n];
    for row in transition.chunks_mut(n) {
        match branching {
            Some(b) if b < n => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                for &i in &idx[..b.max(1)] {
                    row[i] = rng.random::<f64>() + 1e-3;
                }
            }
            _ => row.iter_mut().for_each(|x| *x = rng.random::<f64>() + 1e-3),
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
    let cost = (0..n * num_actions).map(|_| rng.random::<f64>()).collect();
    Mdp::new(n, num_actions, discount, transition, cost)
}

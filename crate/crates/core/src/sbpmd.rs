//! Stochastic block policy mirror descent: the prox update at a sampled
//! state uses a Monte Carlo estimate of its Q-row built from one independent
//! truncated trajectory per action.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalState;
use crate::mdp::{Mdp, Policy};
use crate::oracle::{gap_from_values, OptimalSolution};
use crate::prox::{prox_step, BregmanKind};
use crate::record::{RunOutput, RunRecord};
use crate::regularizer::Regularizer;
use crate::rng::{inverse_cdf, stream, substream, StreamRng, StreamTag};
use crate::sampling::{Sampler, SamplingScheme};
use crate::schedule::StepSchedule;

/// Sampling access to an MDP: next states drawn by inverse CDF over the
/// nonzero entries of each transition row.
#[derive(Clone, Debug)]
pub struct GenerativeModel<'a> {
    mdp: &'a Mdp,
    /// Per `(s, a)`: successor states and their cumulative probabilities.
    rows: Vec<(Vec<usize>, Vec<f64>)>,
}

impl<'a> GenerativeModel<'a> {
    pub fn new(mdp: &'a Mdp) -> Self {
        let rows = (0..mdp.num_states())
            .flat_map(|s| (0..mdp.num_actions()).map(move |a| (s, a)))
            .map(|(s, a)| {
                let mut next = Vec::new();
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for (sp, &p) in mdp.transition_row(s, a).iter().enumerate() {
                    if p > 0.0 {
                        acc += p;
                        next.push(sp);
                        cum.push(acc);
                    }
                }
                (next, cum)
            })
            .collect();
        Self { mdp, rows }
    }

    pub fn mdp(&self) -> &Mdp {
        self.mdp
    }

    /// Draw `s' ~ P(·|s,a)` from a uniform `u ∈ [0,1)`.
    pub fn next_state(&self, s: usize, a: usize, u: f64) -> usize {
        let (next, cum) = &self.rows[s * self.mdp.num_actions() + a];
        let target = u * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c <= target).min(next.len() - 1);
        next[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Trajectory length `T ≥ 1`.
    pub horizon: usize,
}

impl TrajectoryConfig {
    pub fn check(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("trajectory horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Estimated Q-row at one state, with the noise bounds that hold for it.
#[derive(Clone, Debug, PartialEq)]
pub struct QEstimate {
    pub state: usize,
    pub row: Vec<f64>,
    /// `(c̄+h̄)γ^T/(1−γ)`: bound on `‖E[row] − Q(s,·)‖∞`.
    pub bias_bound: f64,
    /// `(c̄+h̄)/(1−γ)`: bound on every entry, hence on the root second moment.
    pub second_moment_bound: f64,
    /// Generative-model calls consumed, `|A|·T`.
    pub samples: u64,
}

/// `(c̄+h̄)/(1−γ)`.
pub fn moment_bound(m: &Mdp, reg: &Regularizer) -> f64 {
    (m.cost_upper_bound() + reg.value_upper_bound(m.num_actions())) / (1.0 - m.discount())
}

/// `(c̄+h̄)γ^T/(1−γ)`.
pub fn bias_bound(m: &Mdp, reg: &Regularizer, horizon: usize) -> f64 {
    moment_bound(m, reg) * m.discount().powi(horizon as i32)
}

/// Discounted cost of one trajectory of length `T` that starts with `(s, a)`
/// and follows `pi` afterwards. `reg_values[s]` is `h^π(s)`.
pub fn simulate_trajectory(
    model: &GenerativeModel<'_>,
    pi: &Policy,
    reg_values: &[f64],
    s: usize,
    a: usize,
    horizon: usize,
    rng: &mut StreamRng,
) -> f64 {
    let m = model.mdp();
    let g = m.discount();
    let (mut state, mut action) = (s, a);
    let mut total = 0.0;
    let mut weight = 1.0;
    for t in 0..horizon {
        total += weight * (m.cost(state, action) + reg_values[state]);
        if t + 1 == horizon {
            break;
        }
        weight *= g;
        state = model.next_state(state, action, rng.random());
        action = inverse_cdf(pi.row(state), rng.random());
    }
    total
}

/// One independent trajectory per action; `stream_for(a)` supplies the
/// random stream for action `a`.
pub fn estimate_q_row(
    model: &GenerativeModel<'_>,
    reg: &Regularizer,
    pi: &Policy,
    reg_values: &[f64],
    s: usize,
    cfg: &TrajectoryConfig,
    mut stream_for: impl FnMut(usize) -> StreamRng,
) -> Result<QEstimate> {
    cfg.check()?;
    let m = model.mdp();
    if s >= m.num_states() {
        return Err(Error::StateOutOfRange { index: s, num_states: m.num_states() });
    }
    let row = (0..m.num_actions())
        .map(|a| simulate_trajectory(model, pi, reg_values, s, a, cfg.horizon, &mut stream_for(a)))
        .collect();
    Ok(QEstimate {
        state: s,
        row,
        bias_bound: bias_bound(m, reg, cfg.horizon),
        second_moment_bound: moment_bound(m, reg),
        samples: (m.num_actions() * cfg.horizon) as u64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Strongly convex regularizer, `μ > 0`.
    Sc,
    /// `μ = 0`.
    Nsc,
}

/// Iteration count and trajectory length prescribed for a target accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub iterations: u64,
    pub horizon: usize,
}

impl SampleBudget {
    /// Total generative-model calls, `k·|A|·T`.
    pub fn total_samples(&self, num_actions: usize) -> f64 {
        self.iterations as f64 * (num_actions * self.horizon) as f64
    }
}

/// Budget under uniform sampling for target accuracy `eps`, using the
/// regularizer's own subgradient bound.
pub fn sample_budget(regime: Regime, eps: f64, m: &Mdp, reg: &Regularizer) -> Result<SampleBudget> {
    sample_budget_with_subgradient_bound(regime, eps, m, reg, reg.subgradient_bound())
}

/// As [`sample_budget`] with an explicit `ℓ_h`, for regularizers (entropy)
/// whose subgradients are unbounded on the simplex but bounded along a run.
pub fn sample_budget_with_subgradient_bound(
    regime: Regime,
    eps: f64,
    m: &Mdp,
    reg: &Regularizer,
    subgradient_bound: f64,
) -> Result<SampleBudget> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("target accuracy {eps} must be positive")));
    }
    if !subgradient_bound.is_finite() {
        return Err(Error::InvalidParameter("the regularizer has no finite subgradient bound".into()));
    }
    let g = m.discount();
    let n = m.num_states() as f64;
    let log_a = (m.num_actions() as f64).ln();
    let scale = m.cost_upper_bound() + reg.value_upper_bound(m.num_actions());
    let spread = scale.powi(2) + subgradient_bound.powi(2);
    let horizon_for = |factor: f64| -> usize {
        let t = (factor * scale / (eps * (1.0 - g))).ln() / (1.0 - g);
        (t.ceil() as usize).max(1)
    };
    let (iterations, horizon) = match regime {
        Regime::Nsc => {
            let k = 4.0 * spread * n * log_a / ((1.0 - g).powi(4) * eps * eps);
            (k, horizon_for(4.0))
        }
        Regime::Sc => {
            let mu = reg.modulus();
            if !(mu > 0.0) {
                return Err(Error::InvalidParameter("the strongly convex budget needs μ > 0".into()));
            }
            let x = 2.0 * n * spread / ((1.0 - g).powi(3) * mu * eps);
            let k = 3.0 * (n + mu * mu) * log_a / (mu * (1.0 - g) * eps) + x * x.ln();
            (k, horizon_for(6.0))
        }
    };
    if !(iterations.is_finite() && iterations < u64::MAX as f64) {
        return Err(Error::InvalidParameter("iteration budget overflows".into()));
    }
    Ok(SampleBudget { iterations: (iterations.ceil() as u64).max(1), horizon })
}

/// Bound on `E[f(π_R) − f(π*)]` for the constant-stepsize method after `k`
/// iterations, for a head set with minimal frequency `rho_dagger_head` and
/// `ν*` tail mass `nu_tail`. `bias` is the bound on the estimator bias.
#[allow(clippy::too_many_arguments)]
pub fn nsc_rate_bound(
    k: u64,
    num_actions: usize,
    moment: f64,
    subgradient_bound: f64,
    rho_dagger_head: f64,
    nu_tail: f64,
    value_scale: f64,
    discount: f64,
    bias: f64,
) -> f64 {
    let c = 1.0 - discount;
    let stat = ((moment.powi(2) + subgradient_bound.powi(2)) * (num_actions as f64).ln()
        / (k as f64 * rho_dagger_head * c * c))
        .sqrt();
    stat + 2.0 * nu_tail * value_scale / (c * c) + 2.0 * bias / c
}

/// Bound on `E[f(π_R) − f(π*)]` for the `|S|/(μ(k+1))` schedule with uniform sampling.
pub fn sc_uniform_rate_bound(
    k: u64,
    num_states: usize,
    num_actions: usize,
    mu: f64,
    moment: f64,
    subgradient_bound: f64,
    discount: f64,
    bias: f64,
) -> f64 {
    let (n, kf, c) = (num_states as f64, k as f64, 1.0 - discount);
    (n + mu * mu) * (num_actions as f64).ln() / (mu * c * kf)
        + n * (moment.powi(2) + subgradient_bound.powi(2)) * kf.ln() / (mu * c * kf)
        + 2.0 * bias / c
}

/// Everything that defines a stochastic run apart from the MDP and `π_0`.
#[derive(Clone, Debug)]
pub struct SbpmdSetup {
    pub regularizer: Regularizer,
    pub scheme: SamplingScheme,
    pub schedule: StepSchedule,
    pub iterations: u64,
    pub trajectory: TrajectoryConfig,
    pub record_every: Option<u64>,
    pub target_gap: Option<f64>,
    pub timing: bool,
}

impl SbpmdSetup {
    pub fn new(
        regularizer: Regularizer,
        scheme: SamplingScheme,
        schedule: StepSchedule,
        iterations: u64,
        horizon: usize,
    ) -> Self {
        Self {
            regularizer,
            scheme,
            schedule,
            iterations,
            trajectory: TrajectoryConfig { horizon },
            record_every: None,
            target_gap: None,
            timing: false,
        }
    }
}

/// Run the stochastic method with KL prox steps.
///
/// State draws use the `(seed, run)` state-sampling stream, exactly as a
/// deterministic run seeded the same way; the trajectory for action `a` at
/// iteration `k` uses its own substream. Exact values are maintained alongside
/// only to log gaps.
pub fn run_sbpmd(
    mdp: &Mdp,
    opt: &OptimalSolution,
    setup: &SbpmdSetup,
    pi0: &Policy,
    seed: u64,
    run: u64,
) -> Result<RunOutput> {
    let reg = setup.regularizer;
    reg.check()?;
    setup.schedule.check()?;
    setup.trajectory.check()?;
    if !pi0.is_strictly_positive() {
        return Err(Error::InvalidPolicy("KL updates need a strictly positive initial policy".into()));
    }
    let n = mdp.num_states();
    let model = GenerativeModel::new(mdp);
    let mut sampler = Sampler::new(&setup.scheme, n, Some(opt), stream(seed, run, StreamTag::StateSampling))?;
    let mut eval = EvalState::new(mdp, &reg, pi0)?;
    let initial_gap = gap_from_values(eval.values(), opt);
    let every = setup.record_every.unwrap_or_else(|| crate::bpmd::default_record_every(n)).max(1);
    let start = Instant::now();
    let mut records = Vec::new();
    let mut samples = 0u64;
    let (mut gap_sum, mut done) = (0.0, 0u64);
    let mut prev_gap = initial_gap;
    if setup.target_gap.is_none_or(|t| initial_gap > t) {
        for i in 1..=setup.iterations {
            let k = i - 1;
            let eta = setup.schedule.eta(k);
            let s = sampler.sample(k as usize, mdp, eval.policy())?;
            let est = estimate_q_row(&model, &reg, eval.policy(), eval.reg_values(), s, &setup.trajectory, |a| {
                substream(seed, run, StreamTag::Trajectory, k, a as u32)
            })?;
            samples += est.samples;
            let row = prox_step(BregmanKind::Kl, &reg, eval.policy().row(s), &est.row, eta)?;
            eval.update_row_or_refresh(mdp, &reg, s, &row)?;
            gap_sum += prev_gap;
            done += 1;
            prev_gap = gap_from_values(eval.values(), opt);
            if i % every == 0 || i == setup.iterations {
                let gap = prev_gap;
                records.push(RunRecord {
                    k: i,
                    updated_states: vec![s],
                    eta,
                    gap,
                    value_checksum: eval.values().iter().sum(),
                    cumulative_updates: i,
                    samples_used: samples,
                    elapsed_ns: if setup.timing { start.elapsed().as_nanos() as u64 } else { 0 },
                });
                if setup.target_gap.is_some_and(|t| gap <= t) {
                    break;
                }
            }
        }
    }
    Ok(RunOutput {
        num_states: n,
        initial_gap,
        records,
        final_policy: eval.policy().clone(),
        final_values: eval.values().to_vec(),
        mean_iterate_gap: Some(if done == 0 { initial_gap } else { gap_sum / done as f64 }),
    })
}

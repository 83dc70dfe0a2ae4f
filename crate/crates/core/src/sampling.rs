//! State-sampling schemes: which state(s) get updated at each iteration.

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::stationary_from_kernel;
use crate::mdp::{Mdp, Policy, StateDistribution};
use crate::oracle::OptimalSolution;
use crate::rng::{substream, CdfTable, StreamRng, StreamTag};

/// Rule producing the sampling distribution `ρ_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplingScheme {
    Uniform,
    Static(StateDistribution),
    /// Static sampling from the optimal stationary distribution.
    NuStar,
    /// Static sampling from a random distribution built from `seed`.
    RandomStatic { seed: u64 },
    /// Stationary distribution of the current policy's chain started at the
    /// previously sampled state (initially `start_state`).
    OnPolicy { start_state: usize },
    /// `rho` for `k < k_tau`, uniform afterwards.
    Hybrid { rho: StateDistribution, k_tau: usize },
}

/// Head/tail statistics of a sampling distribution relative to `ν*`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingDiagnostics {
    /// `min{ρ(s) : ν*(s) > 0}`.
    pub rho_dagger: f64,
    /// `max{ν*(s)/ρ(s) : ν*(s) > 0}`; infinite when not exploratory.
    pub m_surrogate: f64,
    pub exploratory: bool,
    /// Head set: the top states of `ρ`.
    pub head: Vec<usize>,
    /// `min{ρ(s) : s ∈ head ∩ supp ν*}`.
    pub rho_dagger_head: f64,
    /// `ρ` mass on `supp ν* \ head`.
    pub rho_tail_mass: f64,
    /// `ν*` mass on `supp ν* \ head`.
    pub nu_tail_mass: f64,
}

/// Normalized vector of independent `U(0,1]` draws.
pub fn build_random_surrogate(seed: u64, num_states: usize) -> Result<StateDistribution> {
    if num_states == 0 {
        return Err(Error::InvalidParameter("need at least one state".into()));
    }
    let mut rng = substream(seed, 0, StreamTag::Surrogate, 0, 0);
    let w: Vec<f64> = (0..num_states).map(|_| 1.0 - rng.random::<f64>()).collect();
    StateDistribution::normalized(w)
}

/// `⌈alpha / rho_dagger_head⌉`, ignoring floating-point noise in the quotient.
pub fn hybrid_switch_point(alpha: f64, rho_dagger_head: f64) -> Result<usize> {
    if !(alpha > 0.0 && rho_dagger_head > 0.0) {
        return Err(Error::InvalidParameter("switch point needs positive alpha and head frequency".into()));
    }
    let x = alpha / rho_dagger_head;
    Ok((x * (1.0 - 1e-12)).ceil() as usize)
}

/// Indices of the `round(fraction·n)` (at least one) largest entries, ties by index.
pub fn head_set(dist: &[f64], fraction: f64) -> Vec<usize> {
    let size = ((fraction * dist.len() as f64).round() as usize).clamp(1, dist.len());
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    idx.truncate(size);
    idx.sort_unstable();
    idx
}

/// Diagnostics of `rho` against `ν*`, with the head set taken from `rho`.
pub fn compute_diagnostics(rho: &[f64], opt: &OptimalSolution, head_fraction: f64) -> SamplingDiagnostics {
    let head = head_set(rho, head_fraction);
    diagnostics_with_head(rho, opt, head)
}

/// Diagnostics of `rho` against `ν*` for a given head set.
pub fn diagnostics_with_head(rho: &[f64], opt: &OptimalSolution, head: Vec<usize>) -> SamplingDiagnostics {
    let support = &opt.support_star;
    let rho_dagger = support.iter().map(|&s| rho[s]).fold(f64::INFINITY, f64::min);
    let exploratory = rho_dagger > 0.0;
    let m_surrogate = if exploratory {
        support.iter().map(|&s| opt.nu_star[s] / rho[s]).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let in_head = |s: usize| head.binary_search(&s).is_ok();
    let rho_dagger_head = support
        .iter()
        .filter(|&&s| in_head(s))
        .map(|&s| rho[s])
        .fold(f64::INFINITY, f64::min);
    let rho_tail_mass = support.iter().filter(|&&s| !in_head(s)).map(|&s| rho[s]).sum();
    let nu_tail_mass = support.iter().filter(|&&s| !in_head(s)).map(|&s| opt.nu_star[s]).sum();
    SamplingDiagnostics { rho_dagger, m_surrogate, exploratory, head, rho_dagger_head, rho_tail_mass, nu_tail_mass }
}

#[derive(Clone, Debug)]
enum Resolved {
    Uniform,
    Static { probs: Vec<f64>, cdf: CdfTable },
    OnPolicy { last: usize },
    Hybrid { probs: Vec<f64>, cdf: CdfTable, k_tau: usize },
}

/// A sampling scheme bound to its random stream.
#[derive(Clone, Debug)]
pub struct Sampler {
    num_states: usize,
    resolved: Resolved,
    rng: StreamRng,
}

impl Sampler {
    /// Resolve `scheme` for an MDP with `num_states` states. `NuStar` needs `opt`.
    pub fn new(scheme: &SamplingScheme, num_states: usize, opt: Option<&OptimalSolution>, rng: StreamRng) -> Result<Self> {
        let static_of = |probs: Vec<f64>| -> Result<Resolved> {
            if probs.len() != num_states {
                return Err(Error::DimensionMismatch { expected: num_states, found: probs.len() });
            }
            let cdf = CdfTable::new(&probs);
            Ok(Resolved::Static { probs, cdf })
        };
        let resolved = match scheme {
            SamplingScheme::Uniform => Resolved::Uniform,
            SamplingScheme::Static(rho) => static_of(rho.to_vec())?,
            SamplingScheme::NuStar => {
                let opt = opt.ok_or_else(|| Error::InvalidParameter("nu-star sampling needs the optimal solution".into()))?;
                static_of(opt.nu_star.to_vec())?
            }
            SamplingScheme::RandomStatic { seed } => static_of(build_random_surrogate(*seed, num_states)?.into_vec())?,
            SamplingScheme::OnPolicy { start_state } => {
                if *start_state >= num_states {
                    return Err(Error::StateOutOfRange { index: *start_state, num_states });
                }
                Resolved::OnPolicy { last: *start_state }
            }
            SamplingScheme::Hybrid { rho, k_tau } => {
                if rho.len() != num_states {
                    return Err(Error::DimensionMismatch { expected: num_states, found: rho.len() });
                }
                Resolved::Hybrid { probs: rho.to_vec(), cdf: CdfTable::new(rho), k_tau: *k_tau }
            }
        };
        Ok(Self { num_states, resolved, rng })
    }

    /// The distribution `ρ_k` the next draw at iteration `k` uses.
    pub fn distribution(&self, k: usize, m: &Mdp, policy: &Policy) -> Result<Vec<f64>> {
        let n = self.num_states;
        Ok(match &self.resolved {
            Resolved::Uniform => vec![1.0 / n as f64; n],
            Resolved::Static { probs, .. } => probs.clone(),
            Resolved::Hybrid { probs, k_tau, .. } => {
                if k < *k_tau {
                    probs.clone()
                } else {
                    vec![1.0 / n as f64; n]
                }
            }
            Resolved::OnPolicy { last } => on_policy_distribution(m, policy, *last)?.into_vec(),
        })
    }

    /// Draw the state to update at iteration `k`.
    pub fn sample(&mut self, k: usize, m: &Mdp, policy: &Policy) -> Result<usize> {
        let n = self.num_states;
        let u: f64 = self.rng.random();
        Ok(match &mut self.resolved {
            Resolved::Uniform => uniform_index(u, n),
            Resolved::Static { cdf, .. } => cdf.draw(u),
            Resolved::Hybrid { cdf, k_tau, .. } => {
                if k < *k_tau {
                    cdf.draw(u)
                } else {
                    uniform_index(u, n)
                }
            }
            Resolved::OnPolicy { last } => {
                let rho = on_policy_distribution(m, policy, *last)?;
                let s = CdfTable::new(&rho).draw(u);
                *last = s;
                s
            }
        })
    }

    /// Draw `b` distinct states for a block update at iteration `k`.
    pub fn sample_block(&mut self, k: usize, m: &Mdp, policy: &Policy, b: usize) -> Result<Vec<usize>> {
        let n = self.num_states;
        if b == 0 || b > n {
            return Err(Error::InvalidParameter(format!("block size {b} must lie in [1, {n}]")));
        }
        if b == 1 {
            return Ok(vec![self.sample(k, m, policy)?]);
        }
        let mut weights = self.distribution(k, m, policy)?;
        let mut chosen = Vec::with_capacity(b);
        for _ in 0..b {
            if !(weights.iter().sum::<f64>() > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "block size {b} exceeds the support of the sampling distribution"
                )));
            }
            let u: f64 = self.rng.random();
            let s = crate::rng::inverse_cdf(&weights, u);
            weights[s] = 0.0;
            chosen.push(s);
        }
        if let Resolved::OnPolicy { last } = &mut self.resolved {
            *last = *chosen.last().unwrap();
        }
        Ok(chosen)
    }
}

#[inline]
fn uniform_index(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}

fn on_policy_distribution(m: &Mdp, policy: &Policy, last: usize) -> Result<StateDistribution> {
    let n = m.num_states();
    let mut start = vec![0.0; n];
    start[last] = 1.0;
    stationary_from_kernel(&m.policy_transition(policy), &start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn dummy() -> (Mdp, Policy) {
        (Mdp::new(4, 1, 0.5, vec![0.25; 16], vec![0.0; 4]).unwrap(), Policy::uniform(4, 1))
    }

    #[test]
    fn point_mass_always_hits() {
        let (m, pi) = dummy();
        let rho = StateDistribution::point_mass(4, 3).unwrap();
        let mut s = Sampler::new(&SamplingScheme::Static(rho), 4, None, stream(1, 0, StreamTag::StateSampling)).unwrap();
        for k in 0..100 {
            assert_eq!(s.sample(k, &m, &pi).unwrap(), 3);
        }
    }

    #[test]
    fn surrogate_is_positive_and_normalized() {
        assert_eq!(build_random_surrogate(5, 1).unwrap().probs(), &[1.0]);
        let a = build_random_surrogate(5, 50).unwrap();
        assert!(a.iter().all(|&x| x > 0.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, build_random_surrogate(6, 50).unwrap());
    }

    #[test]
    fn switch_points() {
        assert_eq!(hybrid_switch_point(5.0, 0.05).unwrap(), 100);
        assert_eq!(hybrid_switch_point(15.0, 0.01).unwrap(), 1500);
        assert_eq!(hybrid_switch_point(5.0, 0.03).unwrap(), 167);
        assert!(hybrid_switch_point(0.0, 0.1).is_err());
    }

    #[test]
    fn head_set_breaks_ties_by_index() {
        assert_eq!(head_set(&[0.1, 0.3, 0.3, 0.3], 0.5), vec![1, 2]);
        assert_eq!(head_set(&[0.5, 0.5], 0.01), vec![0]);
    }

    #[test]
    fn blocks_are_distinct() {
        let (m, pi) = dummy();
        let mut s = Sampler::new(&SamplingScheme::Uniform, 4, None, stream(2, 0, StreamTag::StateSampling)).unwrap();
        for k in 0..50 {
            let mut b = s.sample_block(k, &m, &pi, 3).unwrap();
            b.sort_unstable();
            b.dedup();
            assert_eq!(b.len(), 3);
        }
    }
}

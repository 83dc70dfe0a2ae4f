//! Building environments and executing configured experiments.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::{
    EnvironmentConfig, ExperimentConfig, InitialPolicyConfig, Method, ResolvedVariant, SamplingKind,
    StepsizeConfig, Surrogate, DEFAULT_ALPHA, DEFAULT_HEAD_FRACTION,
};
use crate::baseline::{default_pg_stepsize, run_batch_baseline, BatchMethod};
use crate::bpmd::{run_bpmd, BpmdSetup};
use crate::envs::{build_gridworld, build_nustar_instance, build_onpolicy_hard_instance, random_mdp};
use crate::error::{with_context, Error, Result};
use crate::mdp::{Mdp, Policy, StateDistribution};
use crate::oracle::{solve_optimal, OptimalSolution, SUPPORT_THRESHOLD};
use crate::record::RunOutput;
use crate::regularizer::Regularizer;
use crate::rng::{stream, StreamTag, RNG_ALGORITHM};
use crate::sampling::{build_random_surrogate, compute_diagnostics, hybrid_switch_point, SamplingDiagnostics, SamplingScheme};
use crate::sbpmd::{moment_bound, run_sbpmd, sample_budget_with_subgradient_bound, SampleBudget, SbpmdSetup};
use crate::schedule::StepSchedule;

/// A built environment with what the metadata needs to know about it.
#[derive(Clone, Debug)]
pub struct Environment {
    pub mdp: Mdp,
    /// Initial policy the instance prescribes, if any.
    pub prescribed_policy: Option<Policy>,
    /// Constant added to the raw costs.
    pub cost_shift: f64,
    /// Where goal and trap cells lead, for GridWorlds.
    pub reset_state: Option<usize>,
}

impl Environment {
    /// SHA-256 of the JSON encoding of the MDP, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.mdp.to_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

pub fn build_environment(cfg: &EnvironmentConfig) -> Result<Environment> {
    let plain = |mdp| Environment { mdp, prescribed_policy: None, cost_shift: 0.0, reset_state: None };
    Ok(match cfg {
        EnvironmentConfig::Gridworld(spec) => {
            let g = build_gridworld(spec)?;
            Environment { mdp: g.mdp, prescribed_policy: None, cost_shift: g.cost_shift, reset_state: Some(g.reset_state) }
        }
        EnvironmentConfig::HardOnpolicy(costs) => {
            let (mdp, pi0) = build_onpolicy_hard_instance(costs)?;
            Environment { mdp, prescribed_policy: Some(pi0), cost_shift: 0.0, reset_state: None }
        }
        EnvironmentConfig::NustarInstance { p, costs } => {
            let (mdp, pi0) = build_nustar_instance(*p, costs)?;
            Environment { mdp, prescribed_policy: Some(pi0), cost_shift: 0.0, reset_state: None }
        }
        EnvironmentConfig::Json { path } => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read environment {}: {e}", path.display())))?;
            plain(Mdp::from_json(&text)?)
        }
        EnvironmentConfig::Random { num_states, num_actions, discount, branching, seed } => {
            plain(random_mdp(*num_states, *num_actions, *discount, *branching, *seed)?)
        }
    })
}

/// Write the configured environment in the MDP JSON format.
pub fn export_env(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let env = build_environment(&cfg.environment)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, env.mdp.to_json()?)?;
    Ok(())
}

/// Command-line overrides for a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Added to every configured seed.
    pub seed_offset: u64,
    /// Worker threads; `None` or 0 uses rayon's default.
    pub jobs: Option<usize>,
}

/// What one (variant, seed) run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub variant: String,
    pub method: Method,
    pub seed: u64,
    pub csv_path: PathBuf,
    pub metadata_path: PathBuf,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub iterations: u64,
}

/// Fully resolved inputs of one run.
struct Plan {
    scheme: Option<SamplingScheme>,
    diagnostics: Option<SamplingDiagnostics>,
    k_tau: Option<usize>,
    schedule: StepSchedule,
    iterations: u64,
    budget: Option<SampleBudget>,
    horizon: Option<usize>,
    pi0: Policy,
}

/// Run every (variant, seed) pair, writing one CSV and one metadata JSON each.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunSummary>> {
    cfg.check()?;
    let env = Arc::new(build_environment(&cfg.environment)?);
    let env_hash = env.hash()?;
    let mut cache: HashMap<String, Arc<OptimalSolution>> = HashMap::new();
    let opt = match cache.get(&env_hash) {
        Some(o) => o.clone(),
        None => {
            let o = Arc::new(with_context(solve_optimal(&env.mdp, &cfg.regularizer), || "solving for the optimal policy".into())?);
            cache.insert(env_hash.clone(), o.clone());
            o
        }
    };
    fs::create_dir_all(&cfg.output)?;
    let jobs: Vec<(ResolvedVariant, u64)> = cfg
        .resolved_variants()
        .into_iter()
        .flat_map(|v| cfg.seeds.iter().map(move |&s| (v.clone(), s + opts.seed_offset)))
        .collect();
    let work = |(v, seed): &(ResolvedVariant, u64)| {
        with_context(run_one(cfg, &env, &env_hash, &opt, v, *seed), || format!("variant {} seed {seed}", v.name))
    };
    let results: Vec<Result<RunSummary>> = match opts.jobs.filter(|&j| j > 0) {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {j} workers: {e}")))?
            .install(|| jobs.par_iter().map(work).collect()),
        None => jobs.par_iter().map(work).collect(),
    };
    results.into_iter().collect()
}

fn run_one(
    cfg: &ExperimentConfig,
    env: &Environment,
    env_hash: &str,
    opt: &OptimalSolution,
    v: &ResolvedVariant,
    seed: u64,
) -> Result<RunSummary> {
    let m = &env.mdp;
    let reg = cfg.regularizer;
    let plan = plan_run(cfg, env, opt, v, seed)?;
    let output = match v.method {
        Method::Bpmd => {
            let mut setup = BpmdSetup::new(reg, v.bregman, plan.scheme.clone().unwrap(), plan.schedule, plan.iterations);
            setup.block_size = v.block_size;
            setup.record_every = cfg.record_every;
            setup.target_gap = cfg.target_gap;
            setup.timing = cfg.timing;
            run_bpmd(m, opt, &setup, &plan.pi0, stream(seed, 0, StreamTag::StateSampling))?
        }
        Method::Sbpmd => {
            let mut setup =
                SbpmdSetup::new(reg, plan.scheme.clone().unwrap(), plan.schedule, plan.iterations, plan.horizon.unwrap());
            setup.record_every = cfg.record_every;
            setup.target_gap = cfg.target_gap;
            setup.timing = cfg.timing;
            run_sbpmd(m, opt, &setup, &plan.pi0, seed, 0)?
        }
        Method::PmdExp | Method::PmdConst | Method::Pg => {
            let batch = match v.method {
                Method::PmdExp => BatchMethod::PmdExp,
                Method::PmdConst => BatchMethod::PmdConst,
                _ => BatchMethod::Pg,
            };
            run_batch_baseline(m, opt, &reg, batch, &plan.schedule, &plan.pi0, plan.iterations, cfg.target_gap, cfg.timing)?
        }
    };
    let stem = format!("{}_seed{seed}", v.name);
    let csv_path = cfg.output.join(format!("{stem}.csv"));
    let metadata_path = cfg.output.join(format!("{stem}.json"));
    let mut buf = Vec::new();
    output.write_csv(&mut buf)?;
    fs::write(&csv_path, buf)?;
    let meta = metadata(cfg, env, env_hash, opt, v, seed, &plan, &output);
    fs::write(&metadata_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(RunSummary {
        variant: v.name.clone(),
        method: v.method,
        seed,
        csv_path,
        metadata_path,
        initial_gap: output.initial_gap,
        final_gap: output.final_gap(),
        iterations: output.records.last().map_or(0, |r| r.k),
    })
}

fn plan_run(cfg: &ExperimentConfig, env: &Environment, opt: &OptimalSolution, v: &ResolvedVariant, seed: u64) -> Result<Plan> {
    let m = &env.mdp;
    let n = m.num_states();
    let reg = cfg.regularizer;
    let sampling = &v.sampling;
    let head_fraction = sampling.head_fraction.unwrap_or(DEFAULT_HEAD_FRACTION);
    let random_seed = sampling.seed.unwrap_or(seed);
    let stochastic = v.method == Method::Sbpmd;
    let uses_sampling = matches!(v.method, Method::Bpmd | Method::Sbpmd);

    let (scheme, rho): (Option<SamplingScheme>, Option<Vec<f64>>) = if !uses_sampling {
        (None, None)
    } else {
        match sampling.kind {
            SamplingKind::Uniform => (Some(SamplingScheme::Uniform), Some(vec![1.0 / n as f64; n])),
            SamplingKind::NuStar => (Some(SamplingScheme::NuStar), Some(opt.nu_star.to_vec())),
            SamplingKind::Random => {
                let rho = build_random_surrogate(random_seed, n)?.into_vec();
                (Some(SamplingScheme::RandomStatic { seed: random_seed }), Some(rho))
            }
            SamplingKind::Static => {
                let probs = sampling
                    .probs
                    .clone()
                    .ok_or_else(|| Error::Config("static sampling needs probs".into()))?;
                if probs.len() != n {
                    return Err(Error::Config(format!("static sampling has {} probabilities for {n} states", probs.len())));
                }
                let rho = StateDistribution::new(probs)?;
                (Some(SamplingScheme::Static(rho.clone())), Some(rho.into_vec()))
            }
            SamplingKind::OnPolicy => {
                (Some(SamplingScheme::OnPolicy { start_state: sampling.start_state.unwrap_or(0) }), None)
            }
            SamplingKind::Hybrid => {
                let rho = match sampling.surrogate {
                    Surrogate::NuStar => opt.nu_star.clone(),
                    Surrogate::Random => build_random_surrogate(random_seed, n)?,
                };
                (Some(SamplingScheme::Hybrid { rho: rho.clone(), k_tau: 0 }), Some(rho.into_vec()))
            }
        }
    };
    let diagnostics = rho.as_ref().map(|r| compute_diagnostics(r, opt, head_fraction));
    let mut k_tau = None;
    let scheme = match (scheme, &diagnostics) {
        (Some(SamplingScheme::Hybrid { rho, .. }), Some(d)) => {
            let k = hybrid_switch_point(sampling.alpha.unwrap_or(DEFAULT_ALPHA), d.rho_dagger_head)?;
            k_tau = Some(k);
            Some(SamplingScheme::Hybrid { rho, k_tau: k })
        }
        (s, _) => s,
    };

    let budget = match (stochastic, cfg.budget) {
        (true, Some(b)) => Some(sample_budget_with_subgradient_bound(
            b.regime,
            b.epsilon,
            m,
            &reg,
            b.subgradient_bound.unwrap_or_else(|| reg.subgradient_bound()),
        )?),
        _ => None,
    };
    let iterations = v
        .iterations
        .or(budget.map(|b| b.iterations))
        .ok_or_else(|| Error::Config(format!("variant {} has no iteration count", v.name)))?;
    let horizon = if stochastic {
        Some(
            cfg.horizon
                .or(budget.map(|b| b.horizon))
                .ok_or_else(|| Error::Config("sbpmd needs a horizon or a budget".into()))?,
        )
    } else {
        None
    };

    let schedule = resolve_schedule(cfg, m, &reg, v, diagnostics.as_ref(), k_tau, iterations)?;
    let pi0 = match &cfg.initial_policy {
        InitialPolicyConfig::Default => {
            env.prescribed_policy.clone().unwrap_or_else(|| Policy::uniform(n, m.num_actions()))
        }
        InitialPolicyConfig::Uniform => Policy::uniform(n, m.num_actions()),
        InitialPolicyConfig::File { path } => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read initial policy {}: {e}", path.display())))?;
            Policy::from_json(&text)?
        }
    };
    if pi0.num_states() != n || pi0.num_actions() != m.num_actions() {
        return Err(Error::Config("initial policy shape does not match the environment".into()));
    }
    Ok(Plan { scheme, diagnostics, k_tau, schedule, iterations, budget, horizon, pi0 })
}

fn resolve_schedule(
    cfg: &ExperimentConfig,
    m: &Mdp,
    reg: &Regularizer,
    v: &ResolvedVariant,
    diag: Option<&SamplingDiagnostics>,
    k_tau: Option<usize>,
    iterations: u64,
) -> Result<StepSchedule> {
    let g = m.discount();
    let n = m.num_states();
    let mu = reg.modulus();
    let rho_dagger = || -> Result<f64> {
        diag.map(|d| d.rho_dagger)
            .filter(|r| *r > 0.0)
            .ok_or_else(|| Error::Config("this stepsize needs an exploratory static sampling distribution".into()))
    };
    let hybrid = |eta0: f64| -> Result<StepSchedule> {
        match (diag, k_tau) {
            (Some(d), Some(k)) => StepSchedule::hybrid(eta0, g, d.rho_dagger_head, n, k),
            _ => Err(Error::Config("the hybrid stepsize needs hybrid sampling".into())),
        }
    };
    // Stochastic schedules use the static distribution's ρ†, or 1/|S| for schemes without one.
    let stochastic_rho = || match v.sampling.kind {
        SamplingKind::Uniform | SamplingKind::NuStar | SamplingKind::Random | SamplingKind::Static => rho_dagger(),
        SamplingKind::OnPolicy | SamplingKind::Hybrid => Ok(1.0 / n as f64),
    };
    let stochastic_nsc = || -> Result<StepSchedule> {
        let lh = cfg
            .budget
            .and_then(|b| b.subgradient_bound)
            .unwrap_or_else(|| reg.subgradient_bound());
        let denom = iterations as f64 * (moment_bound(m, reg).powi(2) + lh * lh) * stochastic_rho()?;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::Config("stochastic constant stepsize needs finite bounds".into()));
        }
        Ok(StepSchedule::Constant { eta: ((m.num_actions() as f64).ln() / denom).sqrt() })
    };
    let stochastic_sc = || -> Result<StepSchedule> {
        if !(mu > 0.0) {
            return Err(Error::Config("the strongly convex stochastic stepsize needs μ > 0".into()));
        }
        Ok(StepSchedule::InverseTime { scale: 1.0 / (mu * stochastic_rho()?) })
    };
    let schedule = match v.stepsize {
        StepsizeConfig::Auto => match v.method {
            Method::Bpmd => {
                if mu > 0.0 {
                    StepSchedule::sc_linear(mu, g)?
                } else {
                    match v.sampling.kind {
                        SamplingKind::Hybrid => hybrid(1.0)?,
                        SamplingKind::OnPolicy => StepSchedule::Constant { eta: 1.0 },
                        _ => StepSchedule::nsc_linear(1.0, g, rho_dagger()?)?,
                    }
                }
            }
            Method::Sbpmd => {
                if mu > 0.0 {
                    stochastic_sc()?
                } else {
                    stochastic_nsc()?
                }
            }
            Method::PmdExp => StepSchedule::batch_exponential(g),
            Method::PmdConst => StepSchedule::Constant { eta: 1.0 },
            Method::Pg => StepSchedule::Constant { eta: default_pg_stepsize(g, m.num_actions()) },
        },
        StepsizeConfig::Constant { eta } => StepSchedule::Constant { eta },
        StepsizeConfig::Exponential { eta0, ratio } => StepSchedule::Exponential { eta0, ratio },
        StepsizeConfig::InverseTime { scale } => StepSchedule::InverseTime { scale },
        StepsizeConfig::NscLinear { eta0 } => StepSchedule::nsc_linear(eta0, g, rho_dagger()?)?,
        StepsizeConfig::ScLinear => StepSchedule::sc_linear(mu, g)?,
        StepsizeConfig::Hybrid { eta0 } => hybrid(eta0)?,
        StepsizeConfig::StochasticNsc => stochastic_nsc()?,
        StepsizeConfig::StochasticSc => stochastic_sc()?,
    };
    schedule.check()?;
    Ok(schedule)
}

#[allow(clippy::too_many_arguments)]
fn metadata(
    cfg: &ExperimentConfig,
    env: &Environment,
    env_hash: &str,
    opt: &OptimalSolution,
    v: &ResolvedVariant,
    seed: u64,
    plan: &Plan,
    out: &RunOutput,
) -> serde_json::Value {
    let m = &env.mdp;
    let d = plan.diagnostics.as_ref();
    let finite = |x: f64| if x.is_finite() { json!(x) } else { json!(x.to_string()) };
    json!({
        "library_version": env!("CARGO_PKG_VERSION"),
        "rng_algorithm": RNG_ALGORITHM,
        "config": cfg,
        "variant": v.name,
        "method": v.method,
        "seed": seed,
        "environment": {
            "hash_sha256": env_hash,
            "num_states": m.num_states(),
            "num_actions": m.num_actions(),
            "discount": m.discount(),
            "cost_upper_bound": m.cost_upper_bound(),
            "cost_shift": env.cost_shift,
            "reset_state": env.reset_state,
        },
        "optimal": {
            "objective": opt.objective(),
            "support_size": opt.support_star.len(),
            "support_threshold": SUPPORT_THRESHOLD,
            "nu_star_start": "uniform",
            "policy_iteration_sweeps": opt.sweeps,
        },
        "sampling": {
            "rho_dagger": d.map(|d| finite(d.rho_dagger)),
            "m_surrogate": d.map(|d| finite(d.m_surrogate)),
            "exploratory": d.map(|d| d.exploratory),
            "head_size": d.map(|d| d.head.len()),
            "rho_dagger_head": d.map(|d| finite(d.rho_dagger_head)),
            "rho_tail_mass": d.map(|d| d.rho_tail_mass),
            "nu_tail_mass": d.map(|d| d.nu_tail_mass),
            "k_tau": plan.k_tau,
        },
        "schedule": plan.schedule,
        "iterations": plan.iterations,
        "block_size": v.block_size,
        "horizon": plan.horizon,
        "budget": plan.budget,
        "result": {
            "initial_gap": out.initial_gap,
            "final_gap": out.final_gap(),
            "random_iterate_gap": out.random_iterate_gap(),
            "records": out.records.len(),
            "samples_used": out.records.last().map_or(0, |r| r.samples_used),
        },
    })
}

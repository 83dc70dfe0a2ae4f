//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{ChainCosts, FourStateCosts, GridWorldSpec};
use crate::error::{Error, Result};
use crate::prox::BregmanKind;
use crate::regularizer::Regularizer;
use crate::sbpmd::Regime;

/// Which environment to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Gridworld(GridWorldSpec),
    /// Three-state chain on which on-policy sampling gets stuck.
    HardOnpolicy(ChainCosts),
    /// Four-state instance on which `ν*`-sampling is slow.
    NustarInstance {
        p: f64,
        #[serde(default)]
        costs: FourStateCosts,
    },
    /// An MDP in the JSON exchange format.
    Json { path: PathBuf },
    /// Seeded random MDP.
    Random {
        num_states: usize,
        num_actions: usize,
        discount: f64,
        #[serde(default)]
        branching: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bpmd,
    Sbpmd,
    PmdExp,
    PmdConst,
    Pg,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bpmd => "bpmd",
            Method::Sbpmd => "sbpmd",
            Method::PmdExp => "pmd_exp",
            Method::PmdConst => "pmd_const",
            Method::Pg => "pg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    #[default]
    Uniform,
    NuStar,
    /// Normalized `U(0,1]` weights drawn from `seed`.
    Random,
    /// Explicit probabilities in `probs`.
    Static,
    OnPolicy,
    Hybrid,
}

/// Stage-I distribution of hybrid sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    #[default]
    NuStar,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default)]
    pub kind: SamplingKind,
    /// Switch-point scale: `k_τ = ⌈alpha / ρ†_H⌉`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Fraction of states in the head set `H`.
    #[serde(default)]
    pub head_fraction: Option<f64>,
    /// Seed for random distributions.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    #[serde(default)]
    pub start_state: Option<usize>,
    #[serde(default)]
    pub surrogate: Surrogate,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            kind: SamplingKind::Uniform,
            alpha: None,
            head_fraction: None,
            seed: None,
            probs: None,
            start_state: None,
            surrogate: Surrogate::NuStar,
        }
    }
}

/// Default head fraction: the top 2% of states.
pub const DEFAULT_HEAD_FRACTION: f64 = 0.02;
/// Default switch-point scale.
pub const DEFAULT_ALPHA: f64 = 5.0;

/// Stepsize rule. `Auto` picks the method's standard schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsizeConfig {
    #[default]
    Auto,
    Constant {
        eta: f64,
    },
    Exponential {
        eta0: f64,
        ratio: f64,
    },
    InverseTime {
        scale: f64,
    },
    /// Growth by `1/(1 − (1−γ)ρ†)` from `eta0`.
    NscLinear {
        #[serde(default = "one")]
        eta0: f64,
    },
    /// Constant `(1/γ − 1)/μ`.
    ScLinear,
    /// Two-phase growth matching hybrid sampling.
    Hybrid {
        #[serde(default = "one")]
        eta0: f64,
    },
    /// `√(log|A| / (k (M² + ℓ_h²) ρ†))`.
    StochasticNsc,
    /// `1/(μ ρ† (k+1))`.
    StochasticSc,
}

fn one() -> f64 {
    1.0
}

/// Initial policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPolicyConfig {
    /// The environment's prescribed policy if it has one, uniform otherwise.
    #[default]
    Default,
    Uniform,
    File {
        path: PathBuf,
    },
}

/// Target-accuracy budget for the stochastic method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub epsilon: f64,
    #[serde(default = "nsc")]
    pub regime: Regime,
    /// Effective `ℓ_h` for regularizers without a global subgradient bound.
    #[serde(default)]
    pub subgradient_bound: Option<f64>,
}

fn nsc() -> Regime {
    Regime::Nsc
}

/// One method curve within an experiment. Unset fields inherit from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub sampling: Option<SamplingConfig>,
    #[serde(default)]
    pub stepsize: Option<StepsizeConfig>,
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub bregman: Option<BregmanKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub stepsize: StepsizeConfig,
    #[serde(default = "zero_reg")]
    pub regularizer: Regularizer,
    #[serde(default = "kl")]
    pub bregman: BregmanKind,
    /// Iteration count; for the stochastic method it may come from `budget` instead.
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    /// Trajectory length for the stochastic method; defaults to the budget's.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "one_usize")]
    pub block_size: usize,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    #[serde(default)]
    pub initial_policy: InitialPolicyConfig,
    #[serde(default)]
    pub record_every: Option<u64>,
    #[serde(default)]
    pub target_gap: Option<f64>,
    /// Record wall time in `elapsed_ns`; off keeps records byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub variants: Vec<VariantConfig>,
}

fn default_method() -> Method {
    Method::Bpmd
}

fn zero_reg() -> Regularizer {
    Regularizer::Zero
}

fn kl() -> BregmanKind {
    BregmanKind::Kl
}

fn one_usize() -> usize {
    1
}

/// A variant with every inherited field filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedVariant {
    pub name: String,
    pub method: Method,
    pub sampling: SamplingConfig,
    pub stepsize: StepsizeConfig,
    pub block_size: usize,
    pub iterations: Option<u64>,
    pub bregman: BregmanKind,
}

impl ExperimentConfig {
    /// Parse and check a config document. Relative paths are taken relative to `base_dir`.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        if let Some(dir) = base_dir {
            cfg.rebase(dir);
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Load a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text, path.parent())
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let EnvironmentConfig::Json { path } = &mut self.environment {
            fix(path);
        }
        if let InitialPolicyConfig::File { path } = &mut self.initial_policy {
            fix(path);
        }
        fix(&mut self.output);
    }

    pub fn check(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.regularizer.check()?;
        if let EnvironmentConfig::Json { path } = &self.environment {
            if !path.is_file() {
                return Err(Error::Config(format!("environment file {} does not exist", path.display())));
            }
        }
        if let InitialPolicyConfig::File { path } = &self.initial_policy {
            if !path.is_file() {
                return Err(Error::Config(format!("initial policy file {} does not exist", path.display())));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for v in self.resolved_variants() {
            if v.name.is_empty() || v.name.contains(['/', '\\']) {
                return Err(Error::Config(format!("variant name {:?} is not a valid file stem", v.name)));
            }
            if !names.insert(v.name.clone()) {
                return Err(Error::Config(format!("duplicate variant name {:?}", v.name)));
            }
            if v.block_size == 0 {
                return Err(Error::Config("block_size must be at least 1".into()));
            }
            if v.iterations.is_none() && !(v.method == Method::Sbpmd && self.budget.is_some()) {
                return Err(Error::Config(format!("variant {:?} needs iterations (or a budget for sbpmd)", v.name)));
            }
        }
        Ok(())
    }

    /// The runs to execute per seed: the declared variants, or one built from the top level.
    pub fn resolved_variants(&self) -> Vec<ResolvedVariant> {
        if self.variants.is_empty() {
            return vec![ResolvedVariant {
                name: self.method.as_str().to_string(),
                method: self.method,
                sampling: self.sampling.clone(),
                stepsize: self.stepsize,
                block_size: self.block_size,
                iterations: self.iterations,
                bregman: self.bregman,
            }];
        }
        self.variants
            .iter()
            .map(|v| ResolvedVariant {
                name: v.name.clone(),
                method: v.method.unwrap_or(self.method),
                sampling: v.sampling.clone().unwrap_or_else(|| self.sampling.clone()),
                stepsize: v.stepsize.unwrap_or(self.stepsize),
                block_size: v.block_size.unwrap_or(self.block_size),
                iterations: v.iterations.or(self.iterations),
                bregman: v.bregman.unwrap_or(self.bregman),
            })
            .collect()
    }
}

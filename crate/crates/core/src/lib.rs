//! Block policy mirror descent for regularized tabular MDPs.
//!
//! The solvers update the policy at one sampled state (or a small block of
//! states) per iteration, keep exact values current through rank-1 inverse
//! updates, and log the optimality gap of every iterate.

pub mod baseline;
pub mod bpmd;
pub mod envs;
pub mod error;
pub mod eval;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod prox;
pub mod record;
pub mod regularizer;
pub mod rng;
pub mod sampling;
pub mod sbpmd;
pub mod schedule;

pub use error::{Error, Result};
pub use mdp::{Mdp, Policy, QFunction, StateDistribution, ValueFunction};
pub use prox::BregmanKind;
pub use regularizer::Regularizer;

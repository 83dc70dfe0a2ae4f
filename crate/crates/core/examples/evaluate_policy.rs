//! Exact policy evaluation, rank-1 updates after a single-row change, and
//! the stationary and discounted visitation distributions.

use bpmd::envs::random_mdp;
use bpmd::eval::{discounted_visitation, evaluate_direct, stationary_distribution, EvalState};
use bpmd::{Policy, Regularizer, StateDistribution};

fn main() -> bpmd::Result<()> {
    let m = random_mdp(6, 3, 0.9, None, 7)?;
    let reg = Regularizer::ScaledNegEntropy { tau: 0.1 };
    let mut pi = Policy::uniform(6, 3);
    let (v, q, _) = evaluate_direct(&m, &reg, &pi)?;
    println!("V under the uniform policy: {:.4?}", v.0);
    println!("Q(0, ·): {:.4?}", q.row(0));

    let mut state = EvalState::new(&m, &reg, &pi)?;
    let row = vec![0.8, 0.1, 0.1];
    pi.set_row(2, &row)?;
    state.update_row_or_refresh(&m, &reg, 2, &row)?;
    let (direct, _, _) = evaluate_direct(&m, &reg, &pi)?;
    let err = state.values().iter().zip(direct.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("rank-1 update vs direct solve after changing state 2: {err:.2e}");

    let nu = stationary_distribution(&m, &pi, &StateDistribution::uniform(6))?;
    println!("stationary distribution: {:.4?}", nu.probs());
    println!("discounted visitation from state 0: {:.4?}", discounted_visitation(&m, &pi, 0)?.probs());
    Ok(())
}

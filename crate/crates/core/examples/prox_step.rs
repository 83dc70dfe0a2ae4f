//! The per-state mirror-descent step for every supported Bregman/regularizer pair.

use bpmd::prox::{prox_step, BregmanKind, SNAP_STEPSIZE};
use bpmd::Regularizer;

fn main() -> bpmd::Result<()> {
    let base = [0.25, 0.25, 0.25, 0.25];
    let q = [1.0, 0.5, 2.0, 0.4];
    let cases = [
        (BregmanKind::Kl, Regularizer::Zero),
        (BregmanKind::Kl, Regularizer::ScaledNegEntropy { tau: 0.5 }),
        (BregmanKind::Kl, Regularizer::SquaredL2 { tau: 0.5 }),
        (BregmanKind::SqEuclidean, Regularizer::Zero),
    ];
    for (kind, reg) in cases {
        for eta in [0.1, 1.0, 10.0, SNAP_STEPSIZE] {
            let p = prox_step(kind, &reg, &base, &q, eta)?;
            println!("{kind:?} {reg:?} η = {eta:e}: {p:.4?}");
        }
    }
    Ok(())
}

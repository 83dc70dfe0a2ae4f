//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, the run
//! index, a purpose tag and up to two counters, so independent consumers
//! never share state and every draw can be replayed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Name of the generator, written into run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), key = master_seed|run_index|counter|sub|tag";

/// What a stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum StreamTag {
    StateSampling = 1,
    Trajectory = 2,
    Surrogate = 3,
    Environment = 4,
    Replicate = 5,
}

/// Stream for `(master_seed, run_index, tag)` with counters `index` and `sub`.
pub fn substream(master_seed: u64, run_index: u64, tag: StreamTag, index: u64, sub: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&run_index.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..28].copy_from_slice(&sub.to_le_bytes());
    key[28..32].copy_from_slice(&(tag as u32).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// The main stream for one purpose within one run.
pub fn stream(master_seed: u64, run_index: u64, tag: StreamTag) -> ChaCha8Rng {
    substream(master_seed, run_index, tag, 0, 0)
}

/// Index drawn from `weights` by inverse CDF. `weights` need not be normalized.
///
/// Never returns an index whose weight is zero.
pub fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Cumulative table for repeated inverse-CDF draws over a fixed distribution.
#[derive(Clone, Debug)]
pub struct CdfTable {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl CdfTable {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut last_positive = 0;
        let cumulative = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if p > 0.0 {
                    last_positive = i;
                }
                acc += p;
                acc
            })
            .collect();
        Self { cumulative, last_positive }
    }

    /// Map `u ∈ [0,1)` to an index.
    pub fn draw(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.last_positive)
    }
}

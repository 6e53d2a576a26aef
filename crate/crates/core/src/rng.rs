//! Seeded random streams.
//!
//! Every stochastic routine draws from ChaCha8 keyed by a 64-bit seed
//! (`seed_from_u64`) with an explicit stream id, so independent consumers
//! (persons blocks, restarts, outcome planting) never share a sequence and
//! results are reproducible across platforms at the integer-stream level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids for the distinct consumers of a seed.
pub mod streams {
    pub const SYNTH_GENERATOR: u64 = 1;
    pub const SYNTH_PERSONS: u64 = 2;
    pub const OUTCOMES: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const REPARAM: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const KMEANS: u64 = 8;
    pub const RAW_LABS: u64 = 9;
    pub const EVENTS: u64 = 10;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fisher-Yates shuffle driven by `rng`; written out so the permutation
/// depends only on the integer stream.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand::Rng as _;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

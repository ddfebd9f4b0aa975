//! Seeded random streams.
//!
//! Every consumer of randomness gets its own stream derived from the run seed
//! and a tag path such as `(purpose, iteration, query)`, so work can be
//! reordered or parallelised without changing any sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut state = splitmix64(seed);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// Stream purposes, used as the first tag.
pub mod purpose {
    pub const SUITE: u64 = 1;
    pub const OFFLINE_FILTER: u64 = 2;
    pub const ROLLOUT: u64 = 3;
    pub const BATCH: u64 = 4;
}

//! Counter-derived random streams.
//!
//! Every parallel unit of work (a bootstrap replication, a Monte Carlo seed,
//! a simulated trial) draws from its own ChaCha stream keyed by the master
//! seed and the unit's index, so results do not depend on scheduling or on
//! the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed; used when a unit of work itself needs a master seed.
pub fn child_seed(master_seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

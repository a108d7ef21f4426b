//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream addressed by a
//! path of integers below the master seed, e.g. `(seed, [rep, DATA, chunk])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = splitmix64(seed);
    for (depth, p) in path.iter().enumerate() {
        state = splitmix64(state ^ splitmix64(p.wrapping_add(depth as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93)));
    }
    let mut key = [0u8; 32];
    for (k, word) in key.chunks_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(k as u64));
        word.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Purpose tags used in stream paths.
pub mod purpose {
    pub const DATA: u64 = 1;
    pub const PILOT: u64 = 2;
    pub const DRAW: u64 = 3;
    pub const UNIFORM: u64 = 4;
    pub const FOLDS: u64 = 5;
    pub const ORACLE: u64 = 6;
}

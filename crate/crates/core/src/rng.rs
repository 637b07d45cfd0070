//! Keyed random substreams.
//!
//! Every random draw in the simulator comes from a fresh generator seeded by
//! hashing `(rng_seed, key parts...)`, so a draw never depends on how many
//! other draws happened before it or in what order cars were visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream channels. Lateral channels follow the sensor channel order.
pub mod channel {
    pub const FRONT: u64 = 0;
    pub const BACK: u64 = 1;
    pub const LEFT: u64 = 2;
    pub const RIGHT: u64 = 3;
    pub const CAMERA: u64 = 4;
    pub const LOSS: u64 = 5;
    pub const PLACEMENT: u64 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}

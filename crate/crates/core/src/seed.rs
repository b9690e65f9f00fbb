//! Child-seed derivation. Every random stream in a sweep is keyed by a
//! path such as `(master, axis index, realization, purpose)`, so streams are
//! independent of execution order and of which schemes are enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes.
pub mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const CEE: u64 = 2;
    pub const INIT: u64 = 3;
    pub const RANDOM_PHASES: u64 = 4;
    pub const SINGLE_IRS_NEAR_BOB: u64 = 5;
    pub const SINGLE_IRS_NEAR_ALICE: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `parent`.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a, used to key seeds by names.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

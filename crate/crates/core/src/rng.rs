//! Seeding helpers.
//!
//! Every random stream in the crate is a `ChaCha8Rng`. Independent streams
//! (per sample, per grid point, per stage) are derived from a parent seed and
//! a salt with one round of SplitMix64, so that work over disjoint ranges can
//! be generated in any order or in parallel with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// One SplitMix64 output step applied to `x`.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and `salt`.
#[inline]
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, salt: u64) -> Rng {
    rng_from_seed(derive_seed(seed, salt))
}

/// Salts for the named streams used across the crate.
pub mod salt {
    pub const SPLIT: u64 = 0x5350_4c49_54;
    pub const TASK: u64 = 0x5441_534b;
    pub const HOLDOUT: u64 = 0x484f_4c44;
    pub const INIT: u64 = 0x494e_4954;
    pub const SHUFFLE: u64 = 0x5348_5546;
    pub const GRID: u64 = 0x4752_4944;
    pub const STAGE_FIT: u64 = 0x5354_4731;
    pub const STAGE_REFIT: u64 = 0x5354_4733;
    pub const VISUAL: u64 = 0x5649_53;
    pub const SEMANTIC: u64 = 0x5345_4d;
    pub const SHARED_NOISE: u64 = 0x5348_4e5a;
}

//! Stable seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`
//! produced here, so results depend only on the master seed and the
//! identifiers of the unit of work, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep streams for different purposes independent even when the
/// remaining identifiers coincide.
pub mod stream {
    pub const POOL: u64 = 0x706f_6f6c;
    pub const THETA: u64 = 0x7468_6574;
    pub const OBSERVATION: u64 = 0x6f62_7376;
    pub const TARGET: u64 = 0x7461_7267;
    pub const REPETITION: u64 = 0x7265_7065;
    pub const CV: u64 = 0x6376_666f;
    pub const MASK: u64 = 0x6d61_736b;
    pub const EXPERT: u64 = 0x6578_7074;
    pub const STRATEGY: u64 = 0x7374_7261;
    pub const RESAMPLE: u64 = 0x7273_6d70;
    pub const TRAINING: u64 = 0x7472_6169;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `master` with an ordered list of identifiers into a new seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

/// Seed identifier for a real-valued cell coordinate (noise variance, fraction).
pub fn float_id(value: f64) -> u64 {
    value.to_bits()
}

/// FNV-1a of a string, for keying streams by textual identifiers.
pub fn str_id(value: &str) -> u64 {
    value
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

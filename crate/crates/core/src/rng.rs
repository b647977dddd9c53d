//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream keyed by a `u64` derived from a master seed and a list of tags
//! (trial index, hypothesis, block index, ...), so results never depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const TAG_H0: u64 = 0x48_30;
pub const TAG_H1: u64 = 0x48_31;
pub const TAG_PROJECTION: u64 = 0x50_52_4f_4a;
pub const TAG_FIT: u64 = 0x46_49_54;
pub const TAG_FRAME: u64 = 0x46_52_4d;
pub const TAG_BLOCK: u64 = 0x42_4c_4b;
pub const TAG_RETRY: u64 = 0x52_54_52_59;
pub const TAG_BOOTSTRAP: u64 = 0x42_4f_4f_54;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`. Order matters: `derive(s, &[a, b]) != derive(s, &[b, a])`.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

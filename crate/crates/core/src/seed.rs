//! Deterministic seed derivation. Every random stream in the pipeline is a
//! ChaCha8 generator keyed by a seed mixed from a parent seed and a label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::{fnv_start, fnv_str, fnv_u64};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(parent: u64, label: &str) -> u64 {
    mix(fnv_str(fnv_u64(fnv_start(), parent), label))
}

pub fn derive_index(parent: u64, label: &str, index: u64) -> u64 {
    mix(fnv_u64(derive(parent, label), index))
}

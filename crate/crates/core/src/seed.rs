//! Deterministic seed splitting.
//!
//! A derived seed is `splitmix64(master ^ splitmix64(index) ^ fnv1a64(label))`.
//! The rule depends only on its inputs, so trial and edge streams are
//! reproducible regardless of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash of a label.
pub fn fnv1a64(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Derives a child seed from a master seed, an index and a component label.
pub fn derive(master: u64, index: u64, label: &str) -> u64 {
    splitmix64(master ^ splitmix64(index) ^ fnv1a64(label))
}

/// Seeded ChaCha20 generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

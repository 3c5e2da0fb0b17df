//! Deterministic seed derivation.
//!
//! A single run seed expands into per-stage and per-item seeds through a fixed
//! splitting rule, so any stage can be re-run in isolation and parallel loops
//! stay schedule-independent. The rule: hash the parent seed together with a
//! stage tag and an index through SplitMix64 finalization steps. Stable across
//! platforms, documented in the README.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche, cheap, stable.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a over the tag bytes.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from `seed` for the named stage.
pub fn split(seed: u64, tag: &str) -> u64 {
    mix(seed ^ tag_hash(tag))
}

/// Derive a child seed for the `index`-th item of the named stage.
pub fn split_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    mix(split(seed, tag) ^ mix(index.wrapping_add(1)))
}

/// Seeded generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

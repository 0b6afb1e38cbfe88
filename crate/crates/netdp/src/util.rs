//! Deterministic hashing and seed derivation shared across modules.
//!
//! Shard placement, worker assignment and every RNG in the crate derive
//! from these mixers so that a run is a pure function of its seeds.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a fixed, platform-independent 64-bit mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of values into one seed. Order-sensitive.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix64(acc ^ p))
}

/// RNG seeded from a derivation path, e.g. `[seed, STREAM, worker, epoch]`.
pub fn rng_from(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

// Stream tags keep independently derived RNGs from colliding.
pub const STREAM_INIT: u64 = 1;
pub const STREAM_WORKER: u64 = 2;
pub const STREAM_PROBE: u64 = 3;
pub const STREAM_DEGREE_CAP: u64 = 4;
pub const STREAM_INFER: u64 = 5;
pub const STREAM_SYNTH: u64 = 6;

/// Deterministic shard owner for a key.
pub fn shard_of(key: u64, num_shards: usize) -> usize {
    (splitmix64(key) % num_shards as u64) as usize
}

/// Deterministic worker owner for a node. Salted so worker assignment is
/// independent of shard placement.
pub fn worker_of(key: u64, num_workers: usize) -> usize {
    (splitmix64(key ^ 0xa076_1d64_78bd_642f) % num_workers as u64) as usize
}

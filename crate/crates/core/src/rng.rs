//! Deterministic seed derivation for parallel streams.
//!
//! All randomness in the crate flows from a master seed through SplitMix64
//! mixing of `(master, stream, index)` into independent ChaCha8 generators.
//! Streams never share state, so tasks, parameters and batches can be
//! generated in any order or in parallel with bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(master, stream, index)` into one well-separated 64-bit seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

/// Independent generator for the given stream and index.
pub fn derived_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

/// Generator straight from a single seed (stream 0, index 0).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named streams used across the crate, kept here so that the derivation
/// scheme is documented in one place.
pub mod streams {
    /// Per-task data generation; index is the task id.
    pub const TASKS: u64 = 1;
    /// Parameter initialization; index identifies (layer, slot).
    pub const PARAMS: u64 = 2;
    /// Outer-loop task batch sampling.
    pub const BATCHES: u64 = 3;
    /// Query-set augmentation draws; index is the task id.
    pub const AUGMENT: u64 = 4;
    /// Evaluation-time draws (equivariance probes and the like).
    pub const EVAL: u64 = 5;
    /// Procedural dataset synthesis.
    pub const DATASET: u64 = 6;
}

//! Deterministic seed derivation.
//!
//! Every random stream in the crate is addressed by a base seed plus a path of
//! integer tags (replicate index, restart index, component pair, ...). The
//! derived stream depends only on that address, so work can be scheduled in
//! any order or on any number of threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all stochastic steps.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`, one splitmix round per tag.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// A generator for the stream addressed by `(seed, tags)`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, tags))
}

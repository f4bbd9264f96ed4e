//! Seed derivation.
//!
//! Every stochastic component draws from ChaCha8, seeded by mixing the user
//! seed with a component-specific stream path through SplitMix64. ChaCha8
//! output is fixed, so results are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 42;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with a stream path such as `[bag, tree]`.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub fn stream_rng(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

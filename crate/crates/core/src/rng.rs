//! Seed derivation. All randomness in the crate is keyed on a user seed plus
//! a small tuple of counters, so any run can be reproduced in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Combines a seed with a list of counters into a new seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// ChaCha generator for `(seed, stream)`; distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counter-based uniform in `[0, 1)`.
pub fn uniform_at(seed: u64, counter: u64) -> f64 {
    (derive_seed(seed, &[counter]) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

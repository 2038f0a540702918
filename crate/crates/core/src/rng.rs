//! Deterministic random number generation.
//!
//! Every randomized routine in this crate takes an explicit `(seed, stream)`
//! pair and derives a counter-based ChaCha8 generator from it. Each logical
//! unit of work (a Monte-Carlo trial, a sampled subset draw) owns its own
//! stream, so results are independent of scheduling order and worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of the root seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 mixing, used to derive per-trial root seeds that are
/// statistically unrelated across trial indices.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

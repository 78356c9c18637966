//! Deterministic random streams.
//!
//! Every stochastic routine takes an explicit seed. Replicate `r` of a
//! campaign draws from ChaCha8 keyed by the base seed on stream `r`, so
//! results do not depend on thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for a single-shot draw.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for replicate `replicate` under `base_seed`.
pub fn replicate_rng(base_seed: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replicate.wrapping_add(1));
    rng
}

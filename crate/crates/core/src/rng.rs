//! Seeded RNG streams.
//!
//! Every sampling path in the crate takes its randomness from a
//! `ChaCha8Rng` derived here, so a `(seed, stream)` pair pins the exact
//! byte sequence. Streams let independent units (rows, replications,
//! epochs) draw without sharing state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// RNG for stream `stream` under the global `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One standard-normal draw.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

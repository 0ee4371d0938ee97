//! Seeded generators. Each consumer draws from its own ChaCha stream so that
//! stream generation and tie-breaking stay independent under one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const STREAM_GENERATOR: u64 = 0;
const STREAM_POLICY: u64 = 1;

/// Generator for building query streams.
pub fn generator_rng(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_GENERATOR);
    rng
}

/// Generator for scheduler tie-breaking.
pub fn policy_rng(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_POLICY);
    rng
}

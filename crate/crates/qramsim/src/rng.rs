//! Seeded, splittable random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for the stream `index` under the global `seed`. Streams with
/// different indices are independent and the mapping is stable across runs
/// and thread schedules.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, e.g. for a nested experiment inside trial `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, index).next_u64()
}

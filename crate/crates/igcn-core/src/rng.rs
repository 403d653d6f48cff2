//! Seeded random streams used across the crate.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

/// Deterministic stream for `seed`.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

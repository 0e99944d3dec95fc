//! Seeded randomness. All stochastic behavior in the crate flows through a
//! [`SeedRng`] so that identical seeds give bitwise-identical runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Deterministic RNG used everywhere in the pipeline.
pub type SeedRng = ChaCha8Rng;

/// Builds the pipeline RNG from a 64-bit seed.
pub fn seed_rng(seed: u64) -> SeedRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named sub-task of a run. Keeps
/// consumers from perturbing each other's draw sequences.
pub fn sub_rng(seed: u64, stream: u64) -> SeedRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw via Box-Muller.
pub fn normal(rng: &mut SeedRng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

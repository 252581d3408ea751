//! Deterministic seed derivation.
//!
//! Every source of randomness in the crate is a [`ChaCha8Rng`] seeded through
//! [`derive_seed`], so a run is fully reproducible from a single campaign
//! seed. Derivation uses a splitmix64 chain, which decorrelates nearby seeds
//! and stream indices.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of stream indices.
///
/// Each distinct `(base, parts)` pair maps to a statistically independent
/// seed; the same pair always maps to the same seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in parts {
        s = splitmix64(s ^ splitmix64(p));
    }
    s
}

/// A deterministic RNG for the given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

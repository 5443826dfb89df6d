//! Stateless, hash-keyed randomness.
//!
//! Every draw is a pure function of a 64-bit key, so results do not depend
//! on thread placement or call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of `s`. Stable across platforms and releases,
/// unlike `std::hash`.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Key for the pair (seed, label).
pub fn key(seed: u64, label: &str) -> u64 {
    mix64(seed ^ mix64(hash_str(label)))
}

/// Uniform in [0, 1) derived from a key, 53 bits of precision.
pub fn unit_f64(key: u64) -> f64 {
    (mix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A generator seeded from a key; for draws that need more than one uniform.
pub fn stream(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}

//! Seeded random streams.
//!
//! All randomness flows through [`ChaCha8Rng`] so that runs are reproducible
//! across platforms. Per-item streams are derived from the run seed and a
//! stable FNV-1a hash of the item key, which makes parallel and serial runs
//! draw identical numbers.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a.
pub fn stable_hash(key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream for one keyed work item.
pub fn derived(seed: u64, key: &str) -> Rng {
    seeded(seed ^ stable_hash(key))
}

//! Seeded random number generation.
//!
//! Every random draw in the toolkit flows from one experiment seed. Sub-streams
//! (per sentence, per epoch, per worker) are derived by mixing the parent seed
//! with a stream index, so work can be split or resumed without changing the
//! values drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere.
pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Derives a child seed from `seed` and a string label.
pub fn derive_seed_str(seed: u64, label: &str) -> u64 {
    // FNV-1a keeps labels stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive_seed(seed, h)
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, index: u64) -> Rng {
    seeded(derive_seed(seed, index))
}

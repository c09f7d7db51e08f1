//! Seed derivation for reproducible, scheduling-independent RNG streams.
//!
//! Every randomized stage derives its own stream from a base seed plus a
//! stream index (user id, matrix row, repetition, ...), so results do not
//! depend on the order in which parallel workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64-style mix of a base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Labelled variant for separating streams that share the same index space.
pub fn derive_seed_labeled(base: u64, label: &str, stream: u64) -> u64 {
    derive_seed(derive_seed(base, fnv1a(label)), stream)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// The RNG used everywhere in this crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

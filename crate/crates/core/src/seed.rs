//! Seed derivation and the crate-wide deterministic generator.
//!
//! Every random draw in the toolkit goes through [`rng_from_seed`]. The
//! generator is ChaCha8 (`rand_chacha`), whose output stream is fixed across
//! platforms and releases; [`RNG_ALGORITHM`] is written into report metadata.
//!
//! Derived seeds are computed as `splitmix64(base ^ splitmix64(salt))`, where
//! string salts are hashed with 64-bit FNV-1a over their UTF-8 bytes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "chacha8";

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ splitmix64(salt))
}

pub fn derive_seed_str(base: u64, salt: &str) -> u64 {
    derive_seed(base, fnv1a64(salt.as_bytes()))
}

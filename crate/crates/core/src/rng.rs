//! Seed streams. Every random draw in the crate goes through a ChaCha
//! generator seeded from a caller seed plus a stream tag, so results are
//! reproducible from the seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for `stream` from `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_for(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream))
}

// Stream tags.
pub const STREAM_BACKGROUND: u64 = 1;
pub const STREAM_DESIGN: u64 = 2;
pub const STREAM_PICK: u64 = 3;
pub const STREAM_FREEZE: u64 = 4;
pub const STREAM_VARIANCE: u64 = 5;

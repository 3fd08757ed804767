//! Explicit, derivable random streams.
//!
//! All randomness flows through [`Stream`] values that are passed in by the
//! caller. Workers get their own stream via [`derive`], keyed by a purpose tag
//! and an index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags for derived streams.
pub mod tag {
    pub const CODEBOOK_V1: u64 = 1;
    pub const CODEBOOK_V2: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const RESTART: u64 = 4;
    pub const SWEEP: u64 = 5;
    pub const SAMPLE: u64 = 6;
    pub const SUITE: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fresh stream for a top-level seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for `(seed, tag, index)`.
pub fn derive(seed: u64, tag: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag)));
    rng.set_stream(splitmix64(index.wrapping_add(tag.rotate_left(32))));
    rng
}

/// Child seed for nested derivations.
pub fn child_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ tag.rotate_left(17)) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: u64 = derive(7, tag::TRIAL, 3).random();
        let b: u64 = derive(7, tag::TRIAL, 3).random();
        let c: u64 = derive(7, tag::TRIAL, 4).random();
        let d: u64 = derive(7, tag::SWEEP, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}

//! Seed derivation and per-agent random streams.
//!
//! Every random decision draws from a stream keyed by
//! `(run seed, round, agent, purpose)`, so results never depend on the order
//! in which agents are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key into a seed, one SplitMix64 round per component.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5157_4D41_524D_5457_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of Monte Carlo run `index` in a batch.
pub fn run_seed(seed_base: u64, index: u64) -> u64 {
    mix_seed(&[seed_base, index])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Spawn = 1,
    Sense = 2,
    Exchange = 3,
    Peer = 4,
    Move = 5,
    Assist = 6,
}

pub fn stream(seed: u64, round: u64, agent: u64, purpose: Purpose) -> StreamRng {
    StreamRng::seed_from_u64(mix_seed(&[seed, round, agent, purpose as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0,
        // i.e. the finalizer applied to successive multiples of the golden gamma.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, 3, 1, Purpose::Move).random();
        let b: u64 = stream(7, 3, 1, Purpose::Move).random();
        let c: u64 = stream(7, 3, 2, Purpose::Move).random();
        let d: u64 = stream(7, 3, 1, Purpose::Sense).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}

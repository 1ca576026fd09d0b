//! Deterministic, splittable randomness.
//!
//! Every sampling entry point in the engine takes a [`RandomSource`]
//! explicitly — there is no ambient RNG. The source wraps ChaCha8, whose
//! stream is stable across platforms and releases for a given seed, so runs
//! are reproducible end to end. [`RandomSource::split`] derives an
//! independent child stream (advancing the parent), which is how parallel
//! chains and per-purpose sub-streams are seeded.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A seeded, splittable random stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    /// A source with a fixed 64-bit seed.
    pub fn from_seed(seed: u64) -> Self {
        RandomSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derives an independent child source, advancing this one.
    pub fn split(&mut self) -> RandomSource {
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        RandomSource {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// A uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::from_seed(7);
        let mut b = RandomSource::from_seed(7);
        let xs: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn split_streams_are_reproducible_and_distinct() {
        let mut parent1 = RandomSource::from_seed(3);
        let mut parent2 = RandomSource::from_seed(3);
        let mut c1 = parent1.split();
        let mut c2 = parent2.split();
        assert_eq!(c1.uniform(), c2.uniform());
        // Child and advanced parent do not mirror each other.
        assert_ne!(parent1.uniform(), c1.uniform());
    }

    /// Frozen first draws for seed 0: any change to the stream algorithm is
    /// a reproducibility break and must be caught.
    #[test]
    fn stream_is_pinned_across_releases() {
        let mut r = RandomSource::from_seed(0);
        let first: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(first, frozen_seed0_draws());
    }

    fn frozen_seed0_draws() -> Vec<u64> {
        // Recorded from rand_chacha 0.9 (ChaCha8, seed_from_u64(0)).
        vec![
            13080132717333068652,
            8594738769458413623,
            12896916468484187878,
        ]
    }
}

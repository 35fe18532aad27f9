//! Seeded randomness.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`), whose
//! output is specified to be identical on every platform. Unit reals use
//! the 53-bit `[0, 1)` conversion of `rand`, standard normals the ziggurat
//! sampler of `rand_distr::StandardNormal`.
//!
//! Independent substreams are derived by key: the child seed is
//! `splitmix64(seed ^ splitmix64(key))`, so a run needs only one
//! user-visible seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Substream keys used across the toolkit.
pub mod keys {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const DICTIONARY: u64 = 10;
    pub const COEFFICIENTS: u64 = 11;
    pub const SIGNAL_NOISE: u64 = 12;
    pub const GAUSSIAN: u64 = 20;
    pub const SALT_PEPPER: u64 = 21;
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the substream `key` under `seed`.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    splitmix64(seed ^ splitmix64(key))
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `key`; does not advance `self`.
    pub fn substream(&self, key: u64) -> SeededRng {
        SeededRng::new(derive_seed(self.seed, key))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    pub fn unit(&mut self) -> f64 {
        self.inner.gen()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn coin(&mut self) -> bool {
        self.inner.gen()
    }

    /// `amount` distinct indices from `0..length`, uniformly.
    pub fn sample_indices(&mut self, length: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, length, amount).into_vec()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

/// Shorthand for [`SeededRng::new`].
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::new(seed)
}

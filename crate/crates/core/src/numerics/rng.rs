//! Named, splittable random number generation.
//!
//! Every random decision in the toolkit draws from a [`SeededRng`] derived from
//! an explicit seed. Sub-streams are derived by label so adding a new consumer
//! never perturbs the draws seen by existing ones.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: SplitMix64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, inner: SplitMix64::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream for `label`. Depends only on the parent's
    /// seed, not on how many values the parent has produced.
    pub fn split(&self, label: &str) -> SeededRng {
        let mut mixer = SplitMix64::seed_from_u64(self.seed ^ fnv1a(label.as_bytes()));
        SeededRng::new(mixer.next_u64())
    }

    pub fn split_index(&self, label: &str, index: u64) -> SeededRng {
        self.split(&format!("{label}#{index}"))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

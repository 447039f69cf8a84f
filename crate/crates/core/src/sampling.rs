//! Seeded random sources and phase ensembles.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic path in the crate. ChaCha output is
/// specified bit-for-bit, so a seed reproduces a run on any platform.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of trial `index` within a run seeded with `seed`.
#[inline]
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index)
}

/// `n` phases uniform on [0, 2pi), one drawn inside each of `n` equal strata.
///
/// Each phase is marginally uniform, but the ensemble mean of a smooth periodic
/// function converges far faster than with independent draws.
pub fn stratified_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let width = TAU / n as f64;
    (0..n)
        .map(|k| width * (k as f64 + rng.random::<f64>()))
        .collect()
}

/// Running mean and sample variance (Welford). Identical inputs give exactly zero spread.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation (n - 1 denominator); zero below two samples.
    pub fn std_dev(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            libm::sqrt(self.m2 / (self.n - 1) as f64)
        }
    }
}

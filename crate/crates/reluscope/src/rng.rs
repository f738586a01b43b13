//! Seeded, portable random number stream.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded with a single `u64`.
//! The same seed always yields the same sample sequence within this crate;
//! bit-exactness across other implementations is not a goal. Gaussian samples
//! come from the Box–Muller transform on the uniform stream, so the whole
//! sample sequence is specified by the uniform source — no ziggurat tables.
//!
//! Trial-level parallelism uses one stream per trial, derived as
//! `base_seed + trial_index`; streams are never shared across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    gen: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            gen: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream by the `seed + index` convention.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(self.seed.wrapping_add(index))
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.gen.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased-enough index in [0, n) via widening multiply.
    pub(crate) fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.gen.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle(&mut self, slice: &mut [usize]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_index(i + 1);
            slice.swap(i, j);
        }
    }

    /// One Box–Muller pair of independent N(0,1) samples.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64(); // (0, 1]: ln stays finite
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Matrix of i.i.d. N(0,1) samples. Odd sample counts discard the second
    /// output of the final Box–Muller pair.
    pub fn standard_normal(&mut self, rows: usize, cols: usize) -> Matrix {
        let n = rows * cols;
        let mut data = Vec::with_capacity(n);
        while data.len() < n {
            let (z0, z1) = self.normal_pair();
            data.push(z0);
            if data.len() < n {
                data.push(z1);
            }
        }
        Matrix::from_vec_unchecked(rows, cols, data)
    }

    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let v = lo + (hi - lo) * self.next_f64();
            // rounding can land exactly on hi; the contract is [lo, hi)
            if v < hi {
                return v;
            }
        }
    }

    /// Matrix of i.i.d. uniform samples on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "uniform: lo ({lo}) must be < hi ({hi})"
            )));
        }
        let data = (0..rows * cols).map(|_| self.uniform_scalar(lo, hi)).collect();
        Ok(Matrix::from_vec_unchecked(rows, cols, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        let ma = a.standard_normal(7, 3);
        let mb = b.standard_normal(7, 3);
        assert_eq!(ma, mb);
        assert_eq!(a.uniform(-1.0, 1.0, 4, 4).unwrap(), b.uniform(-1.0, 1.0, 4, 4).unwrap());
    }

    #[test]
    fn distinct_seeds_distinct_prefixes() {
        for s in [0u64, 1, 7, 1000, u64::MAX - 1] {
            let mut a = RngStream::new(s);
            let mut b = RngStream::new(s + 1);
            let pa: Vec<f64> = (0..16).map(|_| a.next_f64()).collect();
            let pb: Vec<f64> = (0..16).map(|_| b.next_f64()).collect();
            assert_ne!(pa, pb, "seed {s} and {} collide", s + 1);
        }
    }

    #[test]
    fn normal_moments_at_one_million_samples() {
        let mut rng = RngStream::new(7);
        let m = rng.standard_normal(1_000_000, 1);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
        assert!(m.all_finite());
    }

    #[test]
    fn normal_odd_count_is_valid() {
        let mut rng = RngStream::new(3);
        let m = rng.standard_normal(3, 3); // 9 samples: 5 pairs, one discarded
        assert_eq!(m.shape(), (3, 3));
        assert!(m.all_finite());
    }

    #[test]
    fn uniform_range_and_mean() {
        let mut rng = RngStream::new(11);
        let m = rng.uniform(-1.0, 1.0, 1_000_000, 1).unwrap();
        assert!(m.data().iter().all(|&v| (-1.0..1.0).contains(&v)));
        let mean = m.data().iter().sum::<f64>() / m.data().len() as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn uniform_rejects_bad_bounds() {
        let mut rng = RngStream::new(0);
        assert!(rng.uniform(1.0, 1.0, 2, 2).is_err());
        assert!(rng.uniform(2.0, -1.0, 2, 2).is_err());
    }

    #[test]
    fn child_streams_follow_seed_plus_index() {
        let base = RngStream::new(100);
        let mut c = base.child(3);
        let mut direct = RngStream::new(103);
        assert_eq!(c.next_f64(), direct.next_f64());
    }
}

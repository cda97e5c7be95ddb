use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seeded, splittable random number generator.
///
/// Backed by ChaCha8, a counter-based stream cipher. Children derived with
/// [`Rng::split`] depend only on the parent seed and the stream id, never on
/// how many values the parent has produced, so parallel workers get the
/// same streams regardless of scheduling.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child generator for stream `stream`.
    pub fn split(&self, stream: u64) -> Rng {
        Rng::new(splitmix64(
            self.seed ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("empty uniform range [{lo}, {hi})")));
        }
        Ok(self.inner.random_range(lo..hi))
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        let xs: Vec<f64> = (0..100).map(|_| a.uniform(0.0, 1.0).unwrap()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.uniform(0.0, 1.0).unwrap()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn uniform_mean_converges() {
        let mut rng = Rng::new(3);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.uniform(0.0, 1.0).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut rng = Rng::new(5);
        for _ in 0..10_000 {
            let v = rng.uniform(-2.0, 3.0).unwrap();
            assert!((-2.0..3.0).contains(&v));
        }
    }

    #[test]
    fn degenerate_range_is_an_error() {
        let mut rng = Rng::new(0);
        assert!(rng.uniform(1.0, 1.0).is_err());
        assert!(rng.uniform(2.0, 1.0).is_err());
    }

    #[test]
    fn split_ignores_parent_progress() {
        let parent = Rng::new(9);
        let mut advanced = parent.clone();
        for _ in 0..17 {
            advanced.next_u64();
        }
        let mut a = parent.split(4);
        let mut b = advanced.split(4);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(parent.split(4).next_u64(), parent.split(5).next_u64());
    }
}

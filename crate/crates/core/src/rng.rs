//! Counter-based random streams.
//!
//! Every trajectory owns an independent ChaCha8 stream selected by
//! `(seed, trajectory index)`; the block counter inside the stream plays the
//! role of the step index. A trajectory therefore sees the same noise whether
//! it runs alone, in a serial batch or on any worker of a parallel batch.
//!
//! An antithetic stream reads the same words bitwise-complemented, which turns
//! every Rademacher sign into its negation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct TrajectoryRng {
    inner: ChaCha8Rng,
    flip: bool,
    bits: u64,
    bits_left: u32,
}

impl TrajectoryRng {
    pub fn new(seed: u64, index: u64) -> Self {
        Self::with_polarity(seed, index, false)
    }

    /// Mirror image of `new(seed, index)`.
    pub fn antithetic(seed: u64, index: u64) -> Self {
        Self::with_polarity(seed, index, true)
    }

    pub fn with_polarity(seed: u64, index: u64, flip: bool) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        Self {
            inner,
            flip,
            bits: 0,
            bits_left: 0,
        }
    }

    pub fn is_antithetic(&self) -> bool {
        self.flip
    }

    pub fn next_word(&mut self) -> u64 {
        let w = self.inner.next_u64();
        if self.flip {
            !w
        } else {
            w
        }
    }

    /// One stream bit.
    pub fn bit(&mut self) -> bool {
        if self.bits_left == 0 {
            self.bits = self.next_word();
            self.bits_left = 64;
        }
        let b = self.bits & 1 == 1;
        self.bits >>= 1;
        self.bits_left -= 1;
        b
    }

    /// Rademacher sign in {-1, +1}.
    pub fn sign(&mut self) -> f64 {
        if self.bit() {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform on [0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (multiply-shift; bias below 2^-64 * n).
    pub fn index_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_word() as u128 * n as u128) >> 64) as usize
    }

    pub fn gaussian(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        if self.flip {
            -z
        } else {
            z
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = TrajectoryRng::new(7, 3);
        let mut b = TrajectoryRng::new(7, 3);
        for _ in 0..200 {
            assert_eq!(a.next_word(), b.next_word());
        }
    }

    #[test]
    fn distinct_indices_give_distinct_streams() {
        let mut a = TrajectoryRng::new(7, 3);
        let mut b = TrajectoryRng::new(7, 4);
        let same = (0..64).filter(|_| a.next_word() == b.next_word()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn antithetic_signs_are_negated() {
        let mut a = TrajectoryRng::new(11, 0);
        let mut b = TrajectoryRng::antithetic(11, 0);
        for _ in 0..500 {
            assert_eq!(a.sign(), -b.sign());
        }
        let mut a = TrajectoryRng::new(11, 1);
        let mut b = TrajectoryRng::antithetic(11, 1);
        for _ in 0..100 {
            assert_eq!(a.gaussian(), -b.gaussian());
        }
    }

    #[test]
    fn signs_are_balanced() {
        let mut r = TrajectoryRng::new(1, 0);
        let n = 200_000;
        let s: f64 = (0..n).map(|_| r.sign()).sum();
        // 4 standard errors of a Rademacher mean
        assert!((s / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn index_below_stays_in_range() {
        let mut r = TrajectoryRng::new(5, 9);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            counts[r.index_below(7)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
        }
    }
}

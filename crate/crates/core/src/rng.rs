//! Counter-based random streams.
//!
//! A [`SeedKey`] names one stream. The stream is ChaCha8 keyed by the master
//! seed with the ChaCha stream id set to `stream_index`, so any cell of a
//! sweep can be regenerated on its own without replaying the others.

use core::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedKey {
    pub master_seed: u64,
    pub stream_index: u64,
}

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedKey {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// Same master seed, different stream.
    pub const fn with_stream(self, stream_index: u64) -> Self {
        Self { master_seed: self.master_seed, stream_index }
    }

    /// A key for an independent family of streams, labelled by `tag`.
    ///
    /// Used to separate e.g. the training-set streams from the test-set
    /// streams of one experiment cell.
    pub const fn derive(self, tag: u64) -> Self {
        let mixed = splitmix64(self.master_seed ^ splitmix64(tag ^ splitmix64(self.stream_index)));
        Self { master_seed: mixed, stream_index: 0 }
    }

    pub fn stream(self) -> Stream {
        Stream::new(self)
    }
}

/// Deterministic random stream for one [`SeedKey`].
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(key: SeedKey) -> Self {
        let mut seed = [0u8; 32];
        let mut state = key.master_seed;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(key.stream_index);
        Self { rng, spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Circularly-symmetric complex Gaussian with unit variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        let scale = core::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(self.normal() * scale, self.normal() * scale)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn equal_keys_give_equal_streams() {
        let a: Vec<u64> = {
            let mut s = SeedKey::new(7, 0).stream();
            (0..100).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = SeedKey::new(7, 0).stream();
            (0..100).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_stream_index_differs() {
        let mut a = SeedKey::new(7, 0).stream();
        let mut b = SeedKey::new(7, 1).stream();
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniform_mean() {
        let mut s = SeedKey::new(11, 3).stream();
        let n = 100_000;
        let mean = (0..n).map(|_| s.uniform()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn streams_are_uncorrelated() {
        let mut a = SeedKey::new(5, 0).stream();
        let mut b = SeedKey::new(5, 1).stream();
        let n = 50_000;
        let (mut sab, mut sa, mut sb) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (x, y) = (a.uniform() - 0.5, b.uniform() - 0.5);
            sab += x * y;
            sa += x * x;
            sb += y * y;
        }
        let corr = sab / (sa * sb).sqrt();
        assert!(corr.abs() < 0.02, "corr {corr}");
    }

    #[test]
    fn normal_moments() {
        let mut s = SeedKey::new(1, 9).stream();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn derived_keys_are_distinct() {
        let k = SeedKey::new(3, 4);
        assert_ne!(k.derive(1), k.derive(2));
        assert_eq!(k.derive(1), k.derive(1));
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = SeedKey::new(2, 2).stream();
        let mut counts = [0usize; 5];
        for _ in 0..10_000 {
            counts[s.below(5)] += 1;
        }
        assert!(counts.iter().all(|&c| c > 1800 && c < 2200), "{counts:?}");
    }
}

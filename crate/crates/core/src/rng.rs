//! Seeded random streams for the simulator.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A ChaCha8 keystream. ChaCha is counter-based, so a seed fixes the whole
/// sequence on every platform.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `(0, 1]`, with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `Exp(rate)` by inverse CDF, `−ln(u)/rate`.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Stream::new(42);
        let mut b = Stream::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(Stream::new(42).next_u64(), Stream::new(43).next_u64());
    }

    #[test]
    fn uniform_in_half_open_unit_interval() {
        let mut s = Stream::new(7);
        for _ in 0..100_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn exponential_moments() {
        let mut s = Stream::new(1);
        let n = 400_000;
        let rate = 2.5;
        let xs: Vec<f64> = (0..n).map(|_| s.exponential(rate)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // standard error of the mean is 1/(rate·√n)
        assert!((mean - 1.0 / rate).abs() < 4.0 / (rate * (n as f64).sqrt()));
        assert!((var * rate * rate - 1.0).abs() < 0.02);
        assert!(xs.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn exponential_cdf_at_median() {
        let mut s = Stream::new(3);
        let n = 200_000;
        let below = (0..n).filter(|_| s.exponential(1.0) < std::f64::consts::LN_2).count();
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }
}

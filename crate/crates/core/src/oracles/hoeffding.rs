//! Mean estimation of a bounded variable as a worked PAC example.
//!
//! With `m` i.i.d. samples in an interval of width `b`, the empirical mean is
//! within `ε = b·sqrt(ln(1/δ) / (2m))` of the true mean with probability at
//! least `1 − δ` (one-sided Hoeffding; the coverage check is two-sided and
//! therefore conservative).


use crate::error::{Error, Result};
use crate::rng::SeedKey;
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PacBound {
    pub m: usize,
    pub b: f64,
    pub delta: f64,
    pub epsilon: f64,
}

pub fn hoeffding_bound(m: usize, b: f64, delta: f64) -> Result<PacBound> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain("range width b must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("delta must lie in (0, 1)"));
    }
    let epsilon = b * ((1.0 / delta).ln() / (2.0 * m as f64)).sqrt();
    Ok(PacBound { m, b, delta, epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum BoundedDist {
    Constant { value: f64 },
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Unbounded; rejected by [`hoeffding_coverage`].
    Normal { mean: f64, std: f64 },
}

impl BoundedDist {
    /// `(width, mean)` for bounded distributions.
    fn range_and_mean(&self) -> Result<(f64, f64)> {
        match *self {
            // any positive width works for a point mass; use 1
            BoundedDist::Constant { value } => Ok((1.0, value)),
            BoundedDist::Bernoulli { p } if (0.0..=1.0).contains(&p) => Ok((1.0, p)),
            BoundedDist::Uniform { lo, hi } if hi > lo => Ok((hi - lo, 0.5 * (lo + hi))),
            BoundedDist::Normal { .. } => Err(Error::domain("normal distribution is unbounded")),
            other => Err(Error::domain(alloc::format!("invalid distribution {other:?}"))),
        }
    }

    fn sample(&self, s: &mut crate::rng::Stream) -> f64 {
        match *self {
            BoundedDist::Constant { value } => value,
            BoundedDist::Bernoulli { p } => f64::from(u8::from(s.uniform() < p)),
            BoundedDist::Uniform { lo, hi } => lo + (hi - lo) * s.uniform(),
            BoundedDist::Normal { mean, std } => mean + std * s.normal(),
        }
    }
}

/// Fraction of `trials` in which the `m`-sample mean lies within the
/// Hoeffding `ε` of the true mean. Trial `t` draws from stream `t` of `key`.
pub fn hoeffding_coverage(dist: &BoundedDist, m: usize, delta: f64, trials: usize, key: SeedKey) -> Result<f64> {
    if trials < 100 {
        return Err(Error::domain("trials must be at least 100"));
    }
    let (width, mean) = dist.range_and_mean()?;
    let bound = hoeffding_bound(m, width, delta)?;
    let mut covered = 0usize;
    for t in 0..trials {
        let mut s = key.with_stream(key.stream_index.wrapping_add(t as u64)).stream();
        let avg = (0..m).map(|_| dist.sample(&mut s)).sum::<f64>() / m as f64;
        if (avg - mean).abs() <= bound.epsilon {
            covered += 1;
        }
    }
    Ok(covered as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_value() {
        let b = hoeffding_bound(1000, 1.0, 0.05).unwrap();
        let expected = (20f64.ln() / 2000.0).sqrt();
        assert!((b.epsilon - expected).abs() < 1e-15);
        assert!((b.epsilon - 0.03870).abs() < 5e-6);
    }

    #[test]
    fn scaling_laws() {
        let base = hoeffding_bound(250, 1.5, 0.1).unwrap().epsilon;
        assert!((hoeffding_bound(250, 3.0, 0.1).unwrap().epsilon - 2.0 * base).abs() < 1e-15);
        assert!((hoeffding_bound(1000, 1.5, 0.1).unwrap().epsilon - 0.5 * base).abs() < 1e-15);
    }

    #[test]
    fn parameter_ranges() {
        assert!(hoeffding_bound(0, 1.0, 0.1).is_err());
        assert!(hoeffding_bound(10, 0.0, 0.1).is_err());
        assert!(hoeffding_bound(10, 1.0, 1.0).is_err());
        assert!(hoeffding_bound(10, 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_distribution_is_always_covered() {
        let c = hoeffding_coverage(&BoundedDist::Constant { value: 0.3 }, 10, 0.5, 100, SeedKey::new(0, 0));
        assert_eq!(c.unwrap(), 1.0);
    }

    #[test]
    fn uniform_coverage() {
        let dist = BoundedDist::Uniform { lo: 0.0, hi: 1.0 };
        let c = hoeffding_coverage(&dist, 100, 0.1, 2000, SeedKey::new(4, 0)).unwrap();
        assert!(c >= 0.90, "coverage {c}");
    }

    #[test]
    fn unbounded_is_rejected() {
        let dist = BoundedDist::Normal { mean: 0.0, std: 1.0 };
        assert!(hoeffding_coverage(&dist, 10, 0.1, 100, SeedKey::new(0, 0)).is_err());
        assert!(hoeffding_coverage(&BoundedDist::Bernoulli { p: 0.5 }, 10, 0.1, 99, SeedKey::new(0, 0)).is_err());
    }
}

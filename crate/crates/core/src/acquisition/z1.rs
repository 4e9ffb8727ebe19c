use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bq::{JointEvidenceView, ModelIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest sample count accepted by [`sample_z1`].
pub const MIN_Z1_SAMPLES: usize = 1_000;

/// Monte Carlo belief over the posterior probability `z_1 = a_1 / (a_1 + a_2)` of model 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorProbabilityBelief<T> {
    pub z_samples: Vec<T>,
    pub sample_count: usize,
    /// Evidence pairs discarded for having a non-positive component.
    pub rejected: usize,
    /// More than half of all draws were rejected.
    pub degenerate: bool,
}

impl<T: Scalar> PosteriorProbabilityBelief<T> {
    /// All mass at `z`, flagged degenerate. Used when the evidences cannot share a scale.
    pub fn point_mass(z: T) -> Self {
        Self { z_samples: vec![z], sample_count: 1, rejected: 0, degenerate: true }
    }

    pub fn mean(&self) -> T {
        self.z_samples.iter().copied().sum::<T>() / T::from_usize_lossy(self.z_samples.len())
    }

    /// Monte Carlo standard error of [`mean`](Self::mean).
    pub fn standard_error(&self) -> T {
        let n = self.z_samples.len();
        if n < 2 {
            return T::zero();
        }
        let m = self.mean();
        let nn = T::from_usize_lossy(n);
        let var = self.z_samples.iter().map(|&z| (z - m) * (z - m)).sum::<T>() / (nn - T::one());
        (var / nn).sqrt()
    }

    pub fn fraction_above(&self, threshold: T) -> f64 {
        let k = self.z_samples.iter().filter(|&&z| z > threshold).count();
        k as f64 / self.z_samples.len() as f64
    }

    pub fn rejection_rate(&self) -> f64 {
        let attempts = self.rejected + self.sample_count;
        if attempts == 0 {
            0.0
        } else {
            self.rejected as f64 / attempts as f64
        }
    }
}

/// Draws `z_1` by sampling independent Gaussian evidences `N(m_i, K_i)` truncated to positive
/// values by rejection.
///
/// Fails with [`Error::ExcessiveRejection`] once more than 99% of the draws are rejected.
pub fn sample_z1_moments<T: Scalar, R: Rng + ?Sized>(
    m1: T,
    k1: T,
    m2: T,
    k2: T,
    n: usize,
    rng: &mut R,
) -> Result<PosteriorProbabilityBelief<T>> {
    if n < MIN_Z1_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_Z1_SAMPLES} z1 samples, got {n}")));
    }
    if !(k1 >= T::zero() && k2 >= T::zero()) || !m1.is_finite() || !m2.is_finite() {
        return Err(Error::NonFinite("evidence moments"));
    }
    let (s1, s2) = (k1.sqrt(), k2.sqrt());
    let max_attempts = n.saturating_mul(100);
    let mut z_samples = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while z_samples.len() < n && attempts < max_attempts {
        attempts += 1;
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let a1 = m1 + s1 * T::lit(e1);
        let a2 = m2 + s2 * T::lit(e2);
        if a1 > T::zero() && a2 > T::zero() {
            z_samples.push(a1 / (a1 + a2));
        }
    }
    let rejected = attempts - z_samples.len();
    if z_samples.len() < n {
        return Err(Error::ExcessiveRejection { rejected, attempts });
    }
    Ok(PosteriorProbabilityBelief { z_samples, sample_count: n, rejected, degenerate: 2 * rejected > attempts })
}

/// [`sample_z1_moments`] on the reconciled moments of a joint view.
pub fn sample_z1<T: Scalar, R: Rng + ?Sized>(
    view: &JointEvidenceView<T>,
    n: usize,
    rng: &mut R,
) -> Result<PosteriorProbabilityBelief<T>> {
    use ModelIndex::{One, Two};
    sample_z1_moments(view.mean(One), view.var(One), view.mean(Two), view.var(Two), n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn symmetric_beliefs_center_on_half() {
        let b = sample_z1_moments(5.0, 1.0, 5.0, 1.0, 10_000, &mut rng(1)).unwrap();
        assert!((b.mean() - 0.5f64).abs() < 3.0 * b.standard_error());
        assert!(b.z_samples.iter().all(|z| (0.0..=1.0).contains(z)));
    }

    #[test]
    fn near_deterministic_ratio() {
        let b = sample_z1_moments(3.0, 1e-12, 1.0, 1e-12, 1_000, &mut rng(2)).unwrap();
        for z in &b.z_samples {
            assert_relative_eq!(*z, 0.75, epsilon = 1e-5);
        }
    }

    /// Dense 2-D midpoint quadrature of `a1 / (a1 + a2)` against the truncated product density.
    #[test]
    fn matches_truncated_ratio_quadrature() {
        let (m1, m2, k) = (2.0f64, 1.0f64, 0.1f64);
        let s = k.sqrt();
        let h = 0.002;
        let pdf = |a: f64, m: f64| (-(a - m).powi(2) / (2.0 * k)).exp();
        let (mut num, mut den) = (0.0, 0.0);
        let grid = |m: f64| {
            let lo = (m - 9.0 * s).max(0.0);
            let n = ((m + 9.0 * s - lo) / h) as usize;
            (0..n).map(move |i| lo + (i as f64 + 0.5) * h)
        };
        for a1 in grid(m1) {
            let p1 = pdf(a1, m1);
            for a2 in grid(m2) {
                let w = p1 * pdf(a2, m2);
                num += w * a1 / (a1 + a2);
                den += w;
            }
        }
        let oracle = num / den;
        let b = sample_z1_moments(m1, k, m2, k, 20_000, &mut rng(3)).unwrap();
        assert!((b.mean() - oracle).abs() < 3.0 * b.standard_error(), "{} vs {oracle}", b.mean());
    }

    #[test]
    fn flags_and_rejects() {
        let b = sample_z1_moments(-0.5, 1.0, 1.0, 1.0, 1_000, &mut rng(4)).unwrap();
        assert!(b.degenerate);
        let err = sample_z1_moments(-10.0, 1.0, 1.0, 1.0, 1_000, &mut rng(4)).unwrap_err();
        assert!(matches!(err, Error::ExcessiveRejection { .. }));
        assert!(sample_z1_moments(1.0, 1.0, 1.0, 1.0, 999, &mut rng(4)).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = sample_z1_moments(2.0, 0.3, 1.0, 0.2, 2_000, &mut rng(9)).unwrap();
        let b = sample_z1_moments(2.0, 0.3, 1.0, 0.2, 2_000, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }
}

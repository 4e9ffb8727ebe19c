//! Parameter priors `pi_i(theta)` for candidate models.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::qmc;
use crate::scalar::Scalar;

/// Independent per-dimension prior; both kinds integrate to one analytically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterPrior<T> {
    DiagonalGaussian { mean: Vec<T>, sd: Vec<T> },
    UniformBox { lower: Vec<T>, upper: Vec<T> },
}

impl<T: Scalar> ParameterPrior<T> {
    pub fn gaussian(mean: Vec<T>, sd: Vec<T>) -> Result<Self> {
        let p = Self::DiagonalGaussian { mean, sd };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform_box(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        let p = Self::UniformBox { lower, upper };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.location_scale_vecs();
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidParameter("prior needs matching, non-empty parameter vectors".into()));
        }
        match self {
            Self::DiagonalGaussian { sd, .. } if sd.iter().any(|s| !(*s > T::zero())) => {
                Err(Error::InvalidParameter("prior standard deviations must be positive".into()))
            }
            Self::UniformBox { lower, upper } if lower.iter().zip(upper).any(|(l, u)| !(u > l)) => {
                Err(Error::InvalidParameter("uniform box needs lower < upper".into()))
            }
            _ => Ok(()),
        }
    }

    fn location_scale_vecs(&self) -> (&[T], &[T]) {
        match self {
            Self::DiagonalGaussian { mean, sd } => (mean, sd),
            Self::UniformBox { lower, upper } => (lower, upper),
        }
    }

    pub fn dim(&self) -> usize {
        self.location_scale_vecs().0.len()
    }

    /// Log density of the coordinates `dims` only (the prior factorizes).
    pub fn log_density_dims(&self, theta: &[T], dims: std::ops::Range<usize>) -> T {
        let half_ln_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        match self {
            Self::DiagonalGaussian { mean, sd } => dims
                .map(|d| {
                    let z = (theta[d] - mean[d]) / sd[d];
                    -T::lit(0.5) * z * z - sd[d].ln() - half_ln_2pi
                })
                .sum(),
            Self::UniformBox { lower, upper } => {
                let mut acc = T::zero();
                for d in dims {
                    if theta[d] < lower[d] || theta[d] > upper[d] {
                        return T::neg_infinity();
                    }
                    acc -= (upper[d] - lower[d]).ln();
                }
                acc
            }
        }
    }

    pub fn log_density(&self, theta: &[T]) -> T {
        self.log_density_dims(theta, 0..self.dim())
    }

    pub fn density(&self, theta: &[T]) -> T {
        self.log_density(theta).exp()
    }

    pub fn contains(&self, theta: &[T]) -> bool {
        self.log_density(theta) > T::neg_infinity()
    }

    /// Exact i.i.d. draw of the coordinates `dims`.
    pub fn sample_dims<R: Rng + ?Sized>(&self, rng: &mut R, dims: std::ops::Range<usize>) -> Vec<T> {
        match self {
            Self::DiagonalGaussian { mean, sd } => dims
                .map(|d| {
                    let z: f64 = StandardNormal.sample(rng);
                    mean[d] + sd[d] * T::lit(z)
                })
                .collect(),
            Self::UniformBox { lower, upper } => dims
                .map(|d| {
                    let u: f64 = rng.random();
                    lower[d] + (upper[d] - lower[d]) * T::lit(u)
                })
                .collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.sample_dims(rng, 0..self.dim())
    }

    pub fn sample_matrix<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix<T> {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend(self.sample(rng));
        }
        Matrix::from_vec(n, d, data).expect("sized by construction")
    }

    /// Maps a point of the open unit cube through the prior's quantile transform.
    pub fn from_unit_cube(&self, u: &[f64]) -> Vec<T> {
        match self {
            Self::DiagonalGaussian { mean, sd } => {
                u.iter().enumerate().map(|(d, &v)| mean[d] + sd[d] * T::lit(qmc::normal_quantile(v))).collect()
            }
            Self::UniformBox { lower, upper } => {
                u.iter().enumerate().map(|(d, &v)| lower[d] + (upper[d] - lower[d]) * T::lit(v)).collect()
            }
        }
    }

    /// `n` Halton points pushed through the quantile transform, starting at Halton index `start`.
    pub fn low_discrepancy(&self, n: usize, start: u64) -> Matrix<T> {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for u in qmc::halton(n, d, start.max(1)) {
            data.extend(self.from_unit_cube(&u));
        }
        Matrix::from_vec(n, d, data).expect("sized by construction")
    }

    /// Normalized coordinates: standardized for Gaussians, `[0, 1]` for boxes.
    pub fn to_normalized(&self, theta: &[T]) -> Vec<T> {
        let (a, b) = self.location_scale_vecs();
        match self {
            Self::DiagonalGaussian { .. } => {
                theta.iter().zip(a.iter().zip(b)).map(|(&t, (&m, &s))| (t - m) / s).collect()
            }
            Self::UniformBox { .. } => {
                theta.iter().zip(a.iter().zip(b)).map(|(&t, (&l, &u))| (t - l) / (u - l)).collect()
            }
        }
    }

    pub fn from_normalized(&self, u: &[T]) -> Vec<T> {
        let (a, b) = self.location_scale_vecs();
        match self {
            Self::DiagonalGaussian { .. } => u.iter().zip(a.iter().zip(b)).map(|(&v, (&m, &s))| m + s * v).collect(),
            Self::UniformBox { .. } => u.iter().zip(a.iter().zip(b)).map(|(&v, (&l, &h))| l + (h - l) * v).collect(),
        }
    }

    /// Box constraints in normalized coordinates (`None` for unbounded Gaussian priors).
    pub fn normalized_bounds(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::DiagonalGaussian { .. } => None,
            Self::UniformBox { .. } => Some(vec![(0.0, 1.0); self.dim()]),
        }
    }

    pub fn to_f64(&self) -> ParameterPrior<f64> {
        let cv = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        match self {
            Self::DiagonalGaussian { mean, sd } => ParameterPrior::DiagonalGaussian { mean: cv(mean), sd: cv(sd) },
            Self::UniformBox { lower, upper } => ParameterPrior::UniformBox { lower: cv(lower), upper: cv(upper) },
        }
    }
}

//! Moment-matched beliefs over a likelihood from a GP on its logarithm.
//!
//! With `g = log l - c ~ GP(m_g, C_g)`, the exponentiated process has lognormal marginals:
//!
//! ```text
//! mu(t)        = exp(m_g(t) + C_g(t,t)/2)
//! Sigma(t, t') = exp(m_g(t) + m_g(t') + (C_g(t,t) + C_g(t',t'))/2) * (exp(C_g(t,t')) - 1)
//! ```
//!
//! Both describe `l * exp(-c)`; `c` is carried as [`WarpedSurrogate::log_offset`].

use super::posterior::{GaussianProcessPosterior, PointPrediction};
use crate::linalg::dot;
use crate::scalar::Scalar;

/// How the GP output maps to the likelihood scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warping {
    /// GP placed directly on the (offset) likelihood.
    Identity,
    /// GP placed on the log-likelihood; moments are exact lognormal moments.
    Log,
}

/// Moment-matched Gaussian-process belief over one model's likelihood surface.
#[derive(Debug, Clone)]
pub struct WarpedSurrogate<T> {
    gp: GaussianProcessPosterior<T>,
    warping: Warping,
    log_offset: T,
}

/// Per-point quantities needed to evaluate the moment-matched mean and covariances.
#[derive(Debug, Clone)]
pub struct WarpedPoint<T> {
    pub gp: PointPrediction<T>,
    /// Log of the moment-matched mean (for `Log`); the mean itself for `Identity`.
    pub log_scale: T,
}

/// Wraps a log-likelihood GP; the offset defaults to zero.
pub fn warp_moment_match<T: Scalar>(log_gp: GaussianProcessPosterior<T>) -> WarpedSurrogate<T> {
    WarpedSurrogate { gp: log_gp, warping: Warping::Log, log_offset: T::zero() }
}

impl<T: Scalar> WarpedSurrogate<T> {
    pub fn log_warped(log_gp: GaussianProcessPosterior<T>, log_offset: T) -> Self {
        Self { gp: log_gp, warping: Warping::Log, log_offset }
    }

    /// A GP placed on the likelihood itself (no warping).
    pub fn unwarped(gp: GaussianProcessPosterior<T>) -> Self {
        Self { gp, warping: Warping::Identity, log_offset: T::zero() }
    }

    pub fn gp(&self) -> &GaussianProcessPosterior<T> {
        &self.gp
    }

    pub fn warping(&self) -> Warping {
        self.warping
    }

    /// Beliefs describe `likelihood * exp(-log_offset)`.
    pub fn log_offset(&self) -> T {
        self.log_offset
    }

    pub fn dim(&self) -> usize {
        self.gp.dim()
    }

    pub fn point(&self, theta: &[T]) -> WarpedPoint<T> {
        let gp = self.gp.predict(theta);
        let log_scale = match self.warping {
            Warping::Log => gp.mean + T::lit(0.5) * gp.variance,
            Warping::Identity => gp.mean,
        };
        WarpedPoint { gp, log_scale }
    }

    /// Covariance between two prepared points.
    #[inline]
    pub fn cov_points(&self, a: &[T], pa: &WarpedPoint<T>, b: &[T], pb: &WarpedPoint<T>) -> T {
        let c = self.gp.kernel().eval(a, b) - dot(&pa.gp.whitened, &pb.gp.whitened);
        self.cov_from_gp_cov(pa, pb, c)
    }

    /// Maps a log-GP covariance `C_g(a, b)` to the likelihood scale.
    #[inline]
    pub fn cov_from_gp_cov(&self, pa: &WarpedPoint<T>, pb: &WarpedPoint<T>, gp_cov: T) -> T {
        match self.warping {
            Warping::Log => (pa.log_scale + pb.log_scale).exp() * gp_cov.exp_m1(),
            Warping::Identity => gp_cov,
        }
    }

    #[inline]
    pub fn mean_of(&self, p: &WarpedPoint<T>) -> T {
        match self.warping {
            Warping::Log => p.log_scale.exp(),
            Warping::Identity => p.log_scale,
        }
    }

    #[inline]
    pub fn variance_of(&self, p: &WarpedPoint<T>) -> T {
        match self.warping {
            Warping::Log => (T::lit(2.0) * p.log_scale).exp() * p.gp.variance.exp_m1(),
            Warping::Identity => p.gp.variance,
        }
    }

    /// `mu(theta)`
    pub fn moment_matched_mean(&self, theta: &[T]) -> T {
        self.mean_of(&self.point(theta))
    }

    /// `Sigma(a, b)`
    pub fn moment_matched_cov(&self, a: &[T], b: &[T]) -> T {
        let pa = self.point(a);
        let pb = self.point(b);
        self.cov_points(a, &pa, b, &pb)
    }

    pub fn moment_matched_var(&self, theta: &[T]) -> T {
        self.variance_of(&self.point(theta))
    }

    /// `log mu(theta)`, finite even when `mu` itself would overflow.
    pub fn log_mean(&self, theta: &[T]) -> T {
        let p = self.point(theta);
        match self.warping {
            Warping::Log => p.log_scale,
            Warping::Identity => p.log_scale.ln(),
        }
    }

    /// Shifts the offset by `delta`, rescaling every moment by `exp(-delta)` (covariances by
    /// `exp(-2 delta)`).
    pub fn rebase(&self, delta: T) -> Result<Self, crate::Error> {
        match self.warping {
            Warping::Log => {
                let gp = super::posterior::gp_condition(
                    self.gp.kernel().clone(),
                    self.gp.mean_const() - delta,
                    self.gp.obs_locations().clone(),
                    self.gp.obs_values().iter().map(|&v| v - delta).collect(),
                    &super::posterior::ConditionConfig::default(),
                )?;
                Ok(Self { gp, warping: Warping::Log, log_offset: self.log_offset + delta })
            }
            Warping::Identity => Err(crate::Error::Unsupported("rebasing an unwarped surrogate")),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::kernel::{gram, Kernel};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, JitterPolicy, Matrix};
use crate::scalar::Scalar;

/// Settings for conditioning a GP on observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionConfig {
    pub jitter: JitterPolicy,
    /// Minimum pairwise distance between observations, measured in length-scale units.
    pub min_separation: f64,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        Self { jitter: JitterPolicy::default(), min_separation: 1e-8 }
    }
}

/// A constant-mean GP conditioned on noiseless observations (plus a small jitter).
///
/// Immutable after construction; every query is a pure function of the cached factor.
#[derive(Debug, Clone)]
pub struct GaussianProcessPosterior<T> {
    kernel: Kernel<T>,
    mean_const: T,
    obs_locations: Matrix<T>,
    obs_values: Vec<T>,
    chol: Cholesky<T>,
    /// `(K + jitter I)^{-1} (y - mean_const)`
    alpha: Vec<T>,
}

/// Posterior mean and variance at one location together with the whitened cross-covariance
/// `v = L^{-1} k(X, theta)`, which lets callers form covariances between query points.
#[derive(Debug, Clone)]
pub struct PointPrediction<T> {
    pub mean: T,
    pub variance: T,
    pub whitened: Vec<T>,
}

/// Conditions the prior `GP(mean_const, kernel)` on `y = f(X)`.
pub fn gp_condition<T: Scalar>(
    kernel: Kernel<T>,
    mean_const: T,
    x: Matrix<T>,
    y: Vec<T>,
    config: &ConditionConfig,
) -> Result<GaussianProcessPosterior<T>> {
    kernel.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    if x.nrows() > 0 && x.ncols() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), found: x.ncols() });
    }
    if !mean_const.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GP observations"));
    }
    let x = if x.nrows() == 0 { Matrix::zeros(0, kernel.dim()) } else { x };
    let sep = T::lit(config.min_separation);
    for i in 0..x.nrows() {
        for j in 0..i {
            if kernel.scaled_distance(x.row(i), x.row(j)) < sep {
                return Err(Error::DuplicateLocation { first: j, second: i });
            }
        }
    }
    let k = gram(&kernel, &x)?;
    let chol = Cholesky::factor_jittered(&k, kernel.output_scale, config.jitter)?;
    let resid: Vec<T> = y.iter().map(|&v| v - mean_const).collect();
    let alpha = chol.solve(&resid);
    Ok(GaussianProcessPosterior { kernel, mean_const, obs_locations: x, obs_values: y, chol, alpha })
}

impl<T: Scalar> GaussianProcessPosterior<T> {
    /// The unconditioned prior, i.e. a posterior with no observations.
    pub fn prior(kernel: Kernel<T>, mean_const: T) -> Result<Self> {
        let d = kernel.dim();
        gp_condition(kernel, mean_const, Matrix::zeros(0, d), Vec::new(), &ConditionConfig::default())
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn mean_const(&self) -> T {
        self.mean_const
    }

    pub fn obs_locations(&self) -> &Matrix<T> {
        &self.obs_locations
    }

    pub fn obs_values(&self) -> &[T] {
        &self.obs_values
    }

    pub fn n_obs(&self) -> usize {
        self.obs_values.len()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Absolute diagonal jitter added to the Gram matrix.
    pub fn noise_jitter(&self) -> T {
        self.chol.jitter()
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    /// `L^{-1} k(X, theta)`
    pub fn whiten(&self, theta: &[T]) -> Vec<T> {
        let mut v = self.kernel.column(&self.obs_locations, theta);
        self.chol.solve_lower_in_place(&mut v);
        v
    }

    pub fn mean(&self, theta: &[T]) -> T {
        let k = self.kernel.column(&self.obs_locations, theta);
        self.mean_const + dot(&k, &self.alpha)
    }

    pub fn variance(&self, theta: &[T]) -> T {
        let v = self.whiten(theta);
        (self.kernel.output_scale - dot(&v, &v)).max(T::zero())
    }

    pub fn covariance(&self, a: &[T], b: &[T]) -> T {
        let va = self.whiten(a);
        let vb = self.whiten(b);
        self.kernel.eval(a, b) - dot(&va, &vb)
    }

    pub fn predict(&self, theta: &[T]) -> PointPrediction<T> {
        let k = self.kernel.column(&self.obs_locations, theta);
        let mean = self.mean_const + dot(&k, &self.alpha);
        let mut v = k;
        self.chol.solve_lower_in_place(&mut v);
        let variance = (self.kernel.output_scale - dot(&v, &v)).max(T::zero());
        PointPrediction { mean, variance, whitened: v }
    }

    /// Posterior covariance between two points whose predictions are already known.
    #[inline]
    pub fn covariance_from(&self, a: &[T], pa: &PointPrediction<T>, b: &[T], pb: &PointPrediction<T>) -> T {
        self.kernel.eval(a, b) - dot(&pa.whitened, &pb.whitened)
    }

    /// Posterior covariance matrix over the rows of `z`.
    pub fn covariance_matrix(&self, z: &Matrix<T>) -> Matrix<T> {
        let preds: Vec<_> = z.rows().map(|r| self.predict(r)).collect();
        let m = z.nrows();
        let mut c = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = self.covariance_from(z.row(i), &preds[i], z.row(j), &preds[j]);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }

    /// `log N(y; mean_const, K + jitter I)`
    pub fn log_marginal_likelihood(&self) -> T {
        let n = self.n_obs();
        let resid: Vec<T> = self.obs_values.iter().map(|&v| v - self.mean_const).collect();
        let fit = dot(&resid, &self.alpha);
        let ln2pi = T::lit((2.0 * std::f64::consts::PI).ln());
        -T::lit(0.5) * (fit + self.chol.log_det() + T::from_usize_lossy(n) * ln2pi)
    }
}

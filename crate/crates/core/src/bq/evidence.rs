use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GaussianProcessPosterior, KernelFamily, WarpedPoint, WarpedSurrogate, Warping};
use crate::linalg::{dot, Matrix};
use crate::prior::ParameterPrior;
use crate::scalar::Scalar;

/// Quadrature settings for turning a likelihood belief into an evidence belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    /// Number of prior nodes used for `m`.
    pub n_nodes: usize,
    /// Above this node count `K` is estimated from a `k_block x k_block` cross block of
    /// disjoint node subsets instead of the full double sum.
    pub k_block: usize,
    /// Number of leading nodes used for the covariance profile `L(theta)`; `None` uses all.
    pub profile_nodes: Option<usize>,
    /// Halton nodes pushed through the prior quantile transform instead of i.i.d. draws.
    pub low_discrepancy: bool,
    /// Skip the closed form even when it applies.
    pub force_monte_carlo: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { n_nodes: 10_000, k_block: 2_000, profile_nodes: None, low_discrepancy: false, force_monte_carlo: false }
    }
}

/// Minimum number of nodes accepted by [`evidence_belief`].
pub const MIN_QUADRATURE_NODES: usize = 100;

/// A fixed node set drawn from a parameter prior.
#[derive(Debug, Clone)]
pub struct QuadratureNodes<T> {
    points: Arc<Matrix<T>>,
    low_discrepancy: bool,
}

impl<T: Scalar> QuadratureNodes<T> {
    pub fn draw<R: Rng + ?Sized>(prior: &ParameterPrior<T>, cfg: &QuadConfig, rng: &mut R) -> Self {
        let points = if cfg.low_discrepancy {
            prior.low_discrepancy(cfg.n_nodes, 1)
        } else {
            prior.sample_matrix(cfg.n_nodes, rng)
        };
        Self { points: Arc::new(points), low_discrepancy: cfg.low_discrepancy }
    }

    pub fn from_points(points: Matrix<T>, low_discrepancy: bool) -> Self {
        Self { points: Arc::new(points), low_discrepancy }
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn is_low_discrepancy(&self) -> bool {
        self.low_discrepancy
    }
}

/// Moments of the likelihood belief at one location, together with its covariance with the
/// evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint<T> {
    /// `mu(theta)`
    pub mean: T,
    /// `Sigma(theta, theta)`
    pub variance: T,
    /// `L(theta) = cov(l(theta), a)`
    pub cov_profile: T,
}

#[derive(Debug)]
enum ProfileSource<T> {
    Nodes { surrogate: WarpedSurrogate<T>, nodes: Arc<Matrix<T>>, points: Vec<WarpedPoint<T>>, count: usize },
    ClosedForm { surrogate: WarpedSurrogate<T>, kernel_mean: KernelMean<T>, whitened_kernel_mean: Vec<T> },
}

/// Gaussian belief `N(m, K)` over one model's evidence (scaled by `exp(-log_offset)`), plus the
/// covariance profile `L(theta)`.
#[derive(Debug, Clone)]
pub struct EvidenceBelief<T> {
    pub mean_m: T,
    pub var_k: T,
    /// Monte Carlo standard error of `mean_m` (zero on the closed-form path).
    pub mean_se: T,
    pub var_se: T,
    pub log_offset: T,
    /// `K` came out negative and was clamped to zero.
    pub clamped: bool,
    source: Arc<ProfileSource<T>>,
}

impl<T: Scalar> EvidenceBelief<T> {
    pub fn is_closed_form(&self) -> bool {
        matches!(*self.source, ProfileSource::ClosedForm { .. })
    }

    pub fn dim(&self) -> usize {
        self.surrogate().dim()
    }

    /// Likelihood surrogate the belief was integrated from.
    pub fn surrogate(&self) -> &WarpedSurrogate<T> {
        match &*self.source {
            ProfileSource::Nodes { surrogate, .. } | ProfileSource::ClosedForm { surrogate, .. } => surrogate,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.surrogate().gp().n_obs()
    }

    /// `mu(theta)` and `Sigma(theta, theta)` without the profile integral.
    pub fn point_moments(&self, theta: &[T]) -> (T, T) {
        let s = self.surrogate();
        let p = s.point(theta);
        (s.mean_of(&p), s.variance_of(&p))
    }

    /// `L(theta)`
    pub fn cov_profile(&self, theta: &[T]) -> T {
        self.profile_at(theta).cov_profile
    }

    /// `L(theta)` with its Monte Carlo standard error.
    pub fn cov_profile_with_se(&self, theta: &[T]) -> (T, T) {
        match &*self.source {
            ProfileSource::Nodes { surrogate, nodes, points, count } => {
                let p = surrogate.point(theta);
                let vals: Vec<T> =
                    (0..*count).map(|j| surrogate.cov_points(theta, &p, nodes.row(j), &points[j])).collect();
                mean_and_se(&vals)
            }
            ProfileSource::ClosedForm { .. } => (self.cov_profile(theta), T::zero()),
        }
    }

    /// `mu(theta)`, `Sigma(theta, theta)` and `L(theta)` in one pass.
    pub fn profile_at(&self, theta: &[T]) -> ProfilePoint<T> {
        match &*self.source {
            ProfileSource::Nodes { surrogate, nodes, points, count } => {
                let p = surrogate.point(theta);
                let mut acc = T::zero();
                for j in 0..*count {
                    acc += surrogate.cov_points(theta, &p, nodes.row(j), &points[j]);
                }
                ProfilePoint {
                    mean: surrogate.mean_of(&p),
                    variance: surrogate.variance_of(&p),
                    cov_profile: acc / T::from_usize_lossy(*count),
                }
            }
            ProfileSource::ClosedForm { surrogate, kernel_mean, whitened_kernel_mean } => {
                let p = surrogate.gp().predict(theta);
                ProfilePoint {
                    mean: p.mean,
                    variance: p.variance,
                    cov_profile: kernel_mean.at(theta) - dot(&p.whitened, whitened_kernel_mean),
                }
            }
        }
    }
}

fn mean_and_se<T: Scalar>(vals: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(vals.len());
    let mean = vals.iter().copied().sum::<T>() / n;
    if vals.len() < 2 {
        return (mean, T::zero());
    }
    let var = vals.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
    (mean, (var / n).sqrt())
}

/// Integral of an SE kernel against a diagonal Gaussian prior.
#[derive(Debug, Clone)]
struct KernelMean<T> {
    output_scale: T,
    length_sq: Vec<T>,
    prior_mean: Vec<T>,
    prior_var: Vec<T>,
}

impl<T: Scalar> KernelMean<T> {
    /// `int k(theta, x) pi(x) dx`
    fn at(&self, theta: &[T]) -> T {
        let mut acc = self.output_scale;
        for d in 0..theta.len() {
            let s = self.length_sq[d] + self.prior_var[d];
            let diff = theta[d] - self.prior_mean[d];
            acc *= (self.length_sq[d] / s).sqrt() * (-T::lit(0.5) * diff * diff / s).exp();
        }
        acc
    }

    /// `int int k(x, x') pi(x) pi(x') dx dx'`
    fn double(&self) -> T {
        let mut acc = self.output_scale;
        for d in 0..self.length_sq.len() {
            acc *= (self.length_sq[d] / (self.length_sq[d] + T::lit(2.0) * self.prior_var[d])).sqrt();
        }
        acc
    }
}

/// Closed-form evidence moments for an unwarped GP with an SE kernel under a diagonal
/// Gaussian prior.
pub fn evidence_belief_closed_form<T: Scalar>(
    gp: &GaussianProcessPosterior<T>,
    prior: &ParameterPrior<T>,
) -> Result<EvidenceBelief<T>> {
    let ParameterPrior::DiagonalGaussian { mean, sd } = prior else {
        return Err(Error::Unsupported("closed-form evidence needs a diagonal Gaussian prior"));
    };
    let kernel = gp.kernel();
    if kernel.family != KernelFamily::SquaredExponential {
        return Err(Error::Unsupported("closed-form evidence needs a squared-exponential kernel"));
    }
    if prior.dim() != gp.dim() {
        return Err(Error::DimensionMismatch { expected: gp.dim(), found: prior.dim() });
    }
    let km = KernelMean {
        output_scale: kernel.output_scale,
        length_sq: kernel.length_scales.iter().map(|l| *l * *l).collect(),
        prior_mean: mean.clone(),
        prior_var: sd.iter().map(|s| *s * *s).collect(),
    };
    let z: Vec<T> = gp.obs_locations().rows().map(|r| km.at(r)).collect();
    let mut wz = z.clone();
    gp.cholesky().solve_lower_in_place(&mut wz);
    let resid: Vec<T> = gp.obs_values().iter().map(|&v| v - gp.mean_const()).collect();
    let alpha = gp.cholesky().solve(&resid);
    let mean_m = gp.mean_const() + dot(&z, &alpha);
    let raw_k = km.double() - dot(&wz, &wz);
    let (var_k, clamped) = clamp_variance(raw_k);
    Ok(EvidenceBelief {
        mean_m,
        var_k,
        mean_se: T::zero(),
        var_se: T::zero(),
        log_offset: T::zero(),
        clamped,
        source: Arc::new(ProfileSource::ClosedForm {
            surrogate: WarpedSurrogate::unwarped(gp.clone()),
            kernel_mean: km,
            whitened_kernel_mean: wz,
        }),
    })
}

fn clamp_variance<T: Scalar>(k: T) -> (T, bool) {
    if k < T::zero() {
        log::warn!("evidence variance {k} is negative; clamped to zero");
        (T::zero(), true)
    } else {
        (k, false)
    }
}

/// Log-moment above which the surrogate is rebased before integrating.
const REBASE_THRESHOLD: f64 = 300.0;

/// Evidence belief by quadrature over a fixed node set.
///
/// `m = mean_j mu(x_j)`, `K = mean_{j,k} Sigma(x_j, x_k)` and `L(theta) = mean_j Sigma(theta, x_j)`.
/// For an unwarped SE surrogate under a Gaussian prior the closed form is used instead
/// unless `cfg.force_monte_carlo` is set.
pub fn evidence_belief<T: Scalar>(
    surrogate: &WarpedSurrogate<T>,
    prior: &ParameterPrior<T>,
    nodes: &QuadratureNodes<T>,
    cfg: &QuadConfig,
) -> Result<EvidenceBelief<T>> {
    if surrogate.warping() == Warping::Identity && !cfg.force_monte_carlo {
        if let Ok(b) = evidence_belief_closed_form(surrogate.gp(), prior) {
            return Ok(b);
        }
    }
    let n = nodes.len();
    if n < MIN_QUADRATURE_NODES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_QUADRATURE_NODES} quadrature nodes, got {n}")));
    }
    if nodes.points().ncols() != surrogate.dim() {
        return Err(Error::DimensionMismatch { expected: surrogate.dim(), found: nodes.points().ncols() });
    }
    let pts = nodes.points.clone();
    let mut surrogate = surrogate.clone();
    let mut points: Vec<WarpedPoint<T>> = pts.rows().map(|r| surrogate.point(r)).collect();
    if surrogate.warping() == Warping::Log {
        let top = points.iter().map(|p| p.log_scale).fold(T::neg_infinity(), T::max);
        if top > T::lit(REBASE_THRESHOLD) {
            surrogate = surrogate.rebase(top)?;
            points = pts.rows().map(|r| surrogate.point(r)).collect();
        }
    }

    let means: Vec<T> = points.iter().map(|p| surrogate.mean_of(p)).collect();
    let (mean_m, mean_se) = mean_and_se(&means);

    let cov = |j: usize, k: usize| surrogate.cov_points(pts.row(j), &points[j], pts.row(k), &points[k]);
    let (raw_k, var_se) = if n <= cfg.k_block {
        let mut row_means = vec![T::zero(); n];
        for j in 0..n {
            row_means[j] += cov(j, j);
            for k in 0..j {
                let c = cov(j, k);
                row_means[j] += c;
                row_means[k] += c;
            }
        }
        let nn = T::from_usize_lossy(n);
        for r in row_means.iter_mut() {
            *r /= nn;
        }
        let (k, se) = mean_and_se(&row_means);
        (k, T::lit(2.0) * se)
    } else {
        let h = cfg.k_block.min(n / 2).max(1);
        let mut row_means = vec![T::zero(); h];
        let mut col_means = vec![T::zero(); h];
        for j in 0..h {
            for k in 0..h {
                let c = cov(j, h + k);
                row_means[j] += c;
                col_means[k] += c;
            }
        }
        let hh = T::from_usize_lossy(h);
        for r in row_means.iter_mut().chain(col_means.iter_mut()) {
            *r /= hh;
        }
        let (k, se_r) = mean_and_se(&row_means);
        let (_, se_c) = mean_and_se(&col_means);
        (k, (se_r * se_r + se_c * se_c).sqrt())
    };
    let (var_k, clamped) = clamp_variance(raw_k);
    let count = cfg.profile_nodes.unwrap_or(n).clamp(1, n);
    Ok(EvidenceBelief {
        mean_m,
        var_k,
        mean_se,
        var_se,
        log_offset: surrogate.log_offset(),
        clamped,
        source: Arc::new(ProfileSource::Nodes { surrogate, nodes: pts, points, count }),
    })
}

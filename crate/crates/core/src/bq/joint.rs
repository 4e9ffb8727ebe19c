use serde::{Deserialize, Serialize};

use super::evidence::{EvidenceBelief, ProfilePoint};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One of the two candidate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelIndex {
    One,
    Two,
}

impl ModelIndex {
    pub const BOTH: [ModelIndex; 2] = [ModelIndex::One, ModelIndex::Two];

    pub fn index(self) -> usize {
        match self {
            ModelIndex::One => 0,
            ModelIndex::Two => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            ModelIndex::One => ModelIndex::Two,
            ModelIndex::Two => ModelIndex::One,
        }
    }

    /// 1-based label.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl std::fmt::Display for ModelIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "model {}", self.number())
    }
}

/// Largest log ratio between the reconciled evidence scales before the pair is treated as
/// decided.
pub const MAX_LOG_RATIO: f64 = 700.0;

/// The two evidence beliefs brought onto a common scale.
///
/// The model with the lower log-offset is rescaled by `exp(c_low - c_high)` so both beliefs
/// describe evidence times `exp(-c_high)`.
#[derive(Debug, Clone)]
pub struct JointEvidenceView<T> {
    beliefs: [EvidenceBelief<T>; 2],
    scale: [T; 2],
    mean: [T; 2],
    var: [T; 2],
    reference_offset: T,
    dominant: Option<ModelIndex>,
}

/// Reconciles two evidence beliefs onto a shared offset.
pub fn joint_view<T: Scalar>(e1: &EvidenceBelief<T>, e2: &EvidenceBelief<T>) -> JointEvidenceView<T> {
    let delta = e1.log_offset - e2.log_offset;
    let (scale, reference_offset) = if delta >= T::zero() {
        ([T::one(), (-delta).exp()], e1.log_offset)
    } else {
        ([delta.exp(), T::one()], e2.log_offset)
    };
    let mean = [e1.mean_m * scale[0], e2.mean_m * scale[1]];
    let var = [e1.var_k * scale[0] * scale[0], e2.var_k * scale[1] * scale[1]];
    let limit = T::lit(MAX_LOG_RATIO);
    let larger = if mean[0] >= mean[1] { ModelIndex::One } else { ModelIndex::Two };
    let log_ratio = if mean[0] > T::zero() && mean[1] > T::zero() {
        (e1.mean_m.ln() + e1.log_offset - e2.mean_m.ln() - e2.log_offset).abs()
    } else {
        T::infinity()
    };
    let finite = mean.iter().chain(&var).all(|v| v.is_finite());
    let dominant = if !finite || delta.abs() > limit || log_ratio > limit { Some(larger) } else { None };
    JointEvidenceView { beliefs: [e1.clone(), e2.clone()], scale, mean, var, reference_offset, dominant }
}

impl<T: Scalar> JointEvidenceView<T> {
    pub fn belief(&self, i: ModelIndex) -> &EvidenceBelief<T> {
        &self.beliefs[i.index()]
    }

    /// Reconciled evidence mean.
    pub fn mean(&self, i: ModelIndex) -> T {
        self.mean[i.index()]
    }

    /// Reconciled evidence variance.
    pub fn var(&self, i: ModelIndex) -> T {
        self.var[i.index()]
    }

    /// Factor applied to model `i`'s likelihood-scale quantities.
    pub fn scale(&self, i: ModelIndex) -> T {
        self.scale[i.index()]
    }

    pub fn reference_offset(&self) -> T {
        self.reference_offset
    }

    /// `Some(dominant model)` when the evidences are too far apart to share a scale.
    pub fn degenerate(&self) -> Option<ModelIndex> {
        self.dominant
    }

    /// Model with the larger reconciled evidence mean (model 1 on ties).
    pub fn leading(&self) -> ModelIndex {
        if self.mean[0] >= self.mean[1] {
            ModelIndex::One
        } else {
            ModelIndex::Two
        }
    }

    /// Profile of model `i` at `theta` on the reconciled scale.
    pub fn profile(&self, i: ModelIndex, theta: &[T]) -> ProfilePoint<T> {
        let p = self.beliefs[i.index()].profile_at(theta);
        let s = self.scale[i.index()];
        ProfilePoint { mean: p.mean * s, variance: p.variance * s * s, cov_profile: p.cov_profile * s * s }
    }

    /// `log(m_1 / m_2)` including offsets; NaN if either mean is not positive.
    pub fn log_bayes_factor(&self) -> T {
        let [a, b] = &self.beliefs;
        if a.mean_m <= T::zero() || b.mean_m <= T::zero() {
            return T::nan();
        }
        a.mean_m.ln() + a.log_offset - b.mean_m.ln() - b.log_offset
    }

    /// Plug-in `m_1 / (m_1 + m_2)` with equal prior model probabilities.
    pub fn plug_in_z1(&self) -> T {
        let lbf = self.log_bayes_factor();
        if lbf.is_nan() {
            return T::nan();
        }
        // logistic(lbf), stable for large |lbf|
        if lbf >= T::zero() {
            T::one() / (T::one() + (-lbf).exp())
        } else {
            let e = lbf.exp();
            e / (T::one() + e)
        }
    }
}

/// Weight of model `i`'s evidence in the pivot `b = (z - 1) a_1 + z a_2`.
pub fn pivot_weight<T: Scalar>(i: ModelIndex, z1: T) -> T {
    match i {
        ModelIndex::One => z1 - T::one(),
        ModelIndex::Two => z1,
    }
}

/// Mean and variance of the pivot `(z - 1) a_1 + z a_2` from raw moments.
pub fn pivot_moments_raw<T: Scalar>(m1: T, m2: T, k1: T, k2: T, z1: T) -> Result<(T, T)> {
    if !(z1 > T::zero() && z1 < T::one()) {
        return Err(Error::InvalidParameter(format!("z1 must lie in (0, 1), got {z1}")));
    }
    let w1 = z1 - T::one();
    let beta = w1 * m1 + z1 * m2;
    let s2 = w1 * w1 * k1 + z1 * z1 * k2;
    if !(s2 > T::zero()) {
        return Err(Error::DegeneratePivot);
    }
    Ok((beta, s2))
}

/// Mean and variance of the pivot for a joint view.
pub fn pivot_moments<T: Scalar>(view: &JointEvidenceView<T>, z1: T) -> Result<(T, T)> {
    pivot_moments_raw(
        view.mean(ModelIndex::One),
        view.mean(ModelIndex::Two),
        view.var(ModelIndex::One),
        view.var(ModelIndex::Two),
        z1,
    )
}

/// Relative floor on a conditional variance.
pub const CONDITIONAL_VARIANCE_FLOOR: f64 = 1e-12;

/// Entropy drop `H[l] - H[l | b = 0]` for a Gaussian `l` with variance `sigma` and covariance
/// `weight * cov_profile` with a pivot of variance `s2`.
///
/// Returns the drop and whether the conditional variance had to be floored.
pub fn information_from_moments<T: Scalar>(sigma: T, cov_profile: T, weight: T, s2: T) -> (T, bool) {
    if !(sigma > T::zero()) || !(s2 > T::zero()) {
        return (T::zero(), false);
    }
    let c = weight * cov_profile;
    let ratio = c * c / (s2 * sigma);
    let ceiling = T::one() - T::lit(CONDITIONAL_VARIANCE_FLOOR);
    if ratio > ceiling {
        (-T::lit(0.5) * T::lit(CONDITIONAL_VARIANCE_FLOOR).ln(), true)
    } else {
        (-T::lit(0.5) * (-ratio).ln_1p(), false)
    }
}

/// `H[l_i(theta)] - H[l_i(theta) | z_1]` for a single value of `z_1`.
///
/// Zero at locations where the likelihood is already known.
pub fn conditional_likelihood_entropy<T: Scalar>(
    view: &JointEvidenceView<T>,
    model: ModelIndex,
    theta: &[T],
    z1: T,
) -> Result<T> {
    let (_, s2) = pivot_moments(view, z1)?;
    let p = view.profile(model, theta);
    Ok(information_from_moments(p.variance, p.cov_profile, pivot_weight(model, z1), s2).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bq::{evidence_belief, QuadConfig, QuadratureNodes};
    use crate::gp::{gp_condition, warp_moment_match, ConditionConfig, Kernel, KernelFamily};
    use crate::linalg::Matrix;
    use crate::prior::ParameterPrior;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Conditional variance of `cov[t][t]` given the `obs` coordinates, by Gaussian elimination
    /// on the full covariance matrix.
    fn schur_variance(cov: &[Vec<f64>], t: usize, obs: &[usize]) -> f64 {
        let n = obs.len();
        let mut a: Vec<Vec<f64>> = obs.iter().map(|&i| obs.iter().map(|&j| cov[i][j]).collect()).collect();
        let mut b: Vec<f64> = obs.iter().map(|&i| cov[i][t]).collect();
        for col in 0..n {
            let piv = a[col][col];
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / piv;
                    for c in 0..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        let sol: Vec<f64> = (0..n).map(|i| b[i] / a[i][i]).collect();
        cov[t][t] - obs.iter().zip(&sol).map(|(&i, s)| cov[i][t] * s).sum::<f64>()
    }

    fn beliefs() -> (EvidenceBelief<f64>, EvidenceBelief<f64>) {
        let prior = ParameterPrior::gaussian(vec![0.0], vec![1.0]).unwrap();
        let cfg = QuadConfig { n_nodes: 400, ..Default::default() };
        let nodes = QuadratureNodes::draw(&prior, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let mk = |ys: Vec<f64>, ls: f64| {
            let k = Kernel::isotropic(KernelFamily::Matern32, 1.0, ls, 1).unwrap();
            let x = Matrix::from_rows(&[[-1.0], [0.5]], 1).unwrap();
            let gp = gp_condition(k, -1.0, x, ys, &ConditionConfig::default()).unwrap();
            evidence_belief(&warp_moment_match(gp), &prior, &nodes, &cfg).unwrap()
        };
        (mk(vec![-0.3, 0.0], 0.7), mk(vec![-1.5, -0.2], 1.1))
    }

    #[test]
    fn conditioning_matches_brute_force_joint_gaussian() {
        let (e1, e2) = beliefs();
        let view = joint_view(&e1, &e2);
        for &z in &[0.1, 0.35, 0.5, 0.8] {
            for &t in &[-2.0, 0.0, 1.3] {
                for m in ModelIndex::BOTH {
                    let p = view.profile(m, &[t]);
                    // joint covariance of (l, a_1, a_2, b)
                    let (k1, k2) = (view.var(ModelIndex::One), view.var(ModelIndex::Two));
                    let (l1, l2) = match m {
                        ModelIndex::One => (p.cov_profile, 0.0),
                        ModelIndex::Two => (0.0, p.cov_profile),
                    };
                    let w1 = z - 1.0;
                    let lb = w1 * l1 + z * l2;
                    let cov = vec![
                        vec![p.variance, l1, l2, lb],
                        vec![l1, k1, 0.0, w1 * k1],
                        vec![l2, 0.0, k2, z * k2],
                        vec![lb, w1 * k1, z * k2, w1 * w1 * k1 + z * z * k2],
                    ];
                    let cond = schur_variance(&cov, 0, &[3]);
                    let expected = 0.5 * (p.variance / cond).ln();
                    let got = conditional_likelihood_entropy(&view, m, &[t], z).unwrap();
                    assert_relative_eq!(got, expected, max_relative = 1e-9, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn offsets_are_reconciled_toward_higher() {
        let (mut e1, mut e2) = beliefs();
        e1.log_offset = 3.0;
        e2.log_offset = 1.0;
        let v = joint_view(&e1, &e2);
        assert_eq!(v.scale(ModelIndex::One), 1.0);
        assert_relative_eq!(v.scale(ModelIndex::Two), (-2.0f64).exp());
        assert_relative_eq!(v.mean(ModelIndex::Two), e2.mean_m * (-2.0f64).exp());
        assert_relative_eq!(v.var(ModelIndex::Two), e2.var_k * (-4.0f64).exp());
        assert!(v.degenerate().is_none());
        e1.log_offset = 900.0;
        let v = joint_view(&e1, &e2);
        assert_eq!(v.degenerate(), Some(ModelIndex::One));
    }

    #[test]
    fn pivot_rejects_boundary_and_degenerate() {
        assert!(pivot_moments_raw(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(pivot_moments_raw(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert_eq!(pivot_moments_raw(1.0, 1.0, 0.0, 0.0, 0.5), Err(Error::DegeneratePivot));
        let (b, s) = pivot_moments_raw(10.0, 2.0, 4.0, 4.0, 0.25).unwrap();
        assert_relative_eq!(b, -0.75 * 10.0 + 0.25 * 2.0);
        assert_relative_eq!(s, 0.5625 * 4.0 + 0.0625 * 4.0);
    }

    #[test]
    fn information_is_nonnegative_and_floored() {
        assert_eq!(information_from_moments(0.0, 1.0, 1.0, 1.0).0, 0.0);
        let (v, clamped): (f64, bool) = information_from_moments(1.0, 2.0, 1.0, 1.0);
        assert!(clamped && v.is_finite() && v > 0.0);
        let (v, clamped) = information_from_moments(2.0, 0.5, -0.4, 1.5);
        assert!(!clamped && v > 0.0);
    }

    #[test]
    fn plug_in_is_stable() {
        let (mut e1, e2) = beliefs();
        e1.log_offset = 2000.0;
        let v = joint_view(&e1, &e2);
        assert_eq!(v.plug_in_z1(), 1.0);
    }
}

use super::entropy::{binary_entropy, GaussHermite};
use super::z1::PosteriorProbabilityBelief;
use crate::bq::{information_from_moments, pivot_weight, JointEvidenceView, ModelIndex, ProfilePoint};
use crate::qmc::normal_cdf;
use crate::scalar::Scalar;

/// Mutual information between `l_i(theta)` and `z_1`, averaged over the `z_1` samples.
///
/// Returns zero for a degenerate `z_1` belief.
pub fn mi_z1<T: Scalar>(
    view: &JointEvidenceView<T>,
    theta: &[T],
    model: ModelIndex,
    z_belief: &PosteriorProbabilityBelief<T>,
) -> T {
    if z_belief.degenerate {
        return T::zero();
    }
    mi_z1_from_profile(view, &view.profile(model, theta), model, z_belief)
}

/// [`mi_z1`] for an already evaluated profile point.
pub fn mi_z1_from_profile<T: Scalar>(
    view: &JointEvidenceView<T>,
    p: &ProfilePoint<T>,
    model: ModelIndex,
    z_belief: &PosteriorProbabilityBelief<T>,
) -> T {
    if !(p.variance > T::zero()) || p.cov_profile == T::zero() || z_belief.z_samples.is_empty() {
        return T::zero();
    }
    let k1 = view.var(ModelIndex::One);
    let k2 = view.var(ModelIndex::Two);
    let mut acc = T::zero();
    for &z in &z_belief.z_samples {
        let w1 = z - T::one();
        let s2 = w1 * w1 * k1 + z * z * k2;
        acc += information_from_moments(p.variance, p.cov_profile, pivot_weight(model, z), s2).0;
    }
    acc / T::from_usize_lossy(z_belief.z_samples.len())
}

/// `Pr(a_1 > a_2)` under independent Gaussian evidence beliefs; a step function at zero variance.
pub fn prob_first_larger<T: Scalar>(m1: T, k1: T, m2: T, k2: T) -> T {
    let ksum = k1 + k2;
    if ksum > T::zero() {
        T::lit(normal_cdf(((m1 - m2) / ksum.sqrt()).to_f64_lossy()))
    } else if m1 > m2 {
        T::one()
    } else if m1 < m2 {
        T::zero()
    } else {
        T::lit(0.5)
    }
}

/// `H([z_1 > z_2])` under the current evidence beliefs.
pub fn model_choice_entropy<T: Scalar>(view: &JointEvidenceView<T>) -> T {
    use ModelIndex::{One, Two};
    if !(view.var(One) + view.var(Two) > T::zero()) {
        return T::zero();
    }
    binary_entropy(prob_first_larger(view.mean(One), view.var(One), view.mean(Two), view.var(Two)))
}

/// `E[H([z_1 > z_2] | l_i(theta))]`, integrating over `l_i(theta)` by Gauss–Hermite quadrature.
///
/// Conditioned on `l_i(theta)`, `Pr(a_1 > a_2) = Phi(alpha + beta X)` with `X` standard normal;
/// see [`expected_probit_entropy`].
pub fn expected_conditional_model_choice_entropy<T: Scalar>(
    view: &JointEvidenceView<T>,
    p: &ProfilePoint<T>,
    model: ModelIndex,
    rule: &GaussHermite,
) -> T {
    if !(p.variance > T::zero()) || p.cov_profile == T::zero() {
        return model_choice_entropy(view);
    }
    let i = model.index();
    let m = [view.mean(ModelIndex::One).to_f64_lossy(), view.mean(ModelIndex::Two).to_f64_lossy()];
    let mut k = [view.var(ModelIndex::One).to_f64_lossy(), view.var(ModelIndex::Two).to_f64_lossy()];
    let (l, sigma) = (p.cov_profile.to_f64_lossy(), p.variance.to_f64_lossy());
    // a_i | l_i(theta) = m_i + (L / sqrt(Sigma)) X, with variance K_i - L^2 / Sigma.
    k[i] = (k[i] - l * l / sigma).max(0.0);
    let s = (k[0] + k[1]).sqrt();
    if !(s > 0.0) {
        // The observation would decide the comparison outright.
        return T::zero();
    }
    let sign = if i == 0 { 1.0 } else { -1.0 };
    T::lit(expected_probit_entropy((m[0] - m[1]) / s, sign * l / sigma.sqrt() / s, rule))
}

/// `E[H(Phi(alpha + beta X))]` for standard normal `X`.
///
/// For `|beta| <= 1` the rule is applied in `X`. Otherwise the integrand is a spike narrower
/// than the node spacing, so the rule is applied in `u = alpha + beta X`, where the integrand
/// `H(Phi(u)) / phi(u) * N(u; alpha, beta^2)` is smooth.
pub fn expected_probit_entropy(alpha: f64, beta: f64, rule: &GaussHermite) -> f64 {
    if beta.abs() <= 1.0 {
        return rule.expect_normal(0.0, 1.0, |x| binary_entropy(normal_cdf(alpha + beta * x)));
    }
    let ln_norm = -beta.abs().ln();
    rule.expect_normal(0.0, 1.0, |u| {
        let log_h = log_probit_entropy(u);
        if log_h == f64::NEG_INFINITY {
            return 0.0;
        }
        (log_h + 0.5 * u * u - 0.5 * ((u - alpha) / beta).powi(2) + ln_norm).exp()
    })
}

/// `ln H(Phi(u))`, evaluated through the smaller tail probability.
fn log_probit_entropy(u: f64) -> f64 {
    let p = normal_cdf(-u.abs());
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (-(p * p.ln() + (1.0 - p) * (-p).ln_1p())).ln()
}

/// Mutual information between `l_i(theta)` and the model-choice indicator `[z_1 > z_2]`.
pub fn mi_model_choice<T: Scalar>(
    view: &JointEvidenceView<T>,
    theta: &[T],
    model: ModelIndex,
    rule: &GaussHermite,
) -> T {
    mi_model_choice_from_profile(view, &view.profile(model, theta), model, rule)
}

/// [`mi_model_choice`] for an already evaluated profile point, clamped at zero.
pub fn mi_model_choice_from_profile<T: Scalar>(
    view: &JointEvidenceView<T>,
    p: &ProfilePoint<T>,
    model: ModelIndex,
    rule: &GaussHermite,
) -> T {
    let prior = model_choice_entropy(view);
    if prior == T::zero() {
        return T::zero();
    }
    (prior - expected_conditional_model_choice_entropy(view, p, model, rule)).max(T::zero())
}

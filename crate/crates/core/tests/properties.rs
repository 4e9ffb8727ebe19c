//! Randomized invariants of the evidence beliefs, the pivot conditioning and the acquisition.

use bqsel::acquisition::{binary_entropy, mi_model_choice, mi_z1, sample_z1, GaussHermite};
use bqsel::bq::{
    evidence_belief, information_from_moments, joint_view, pivot_moments_raw, pivot_weight, EvidenceBelief, ModelIndex,
    QuadConfig, QuadratureNodes,
};
use bqsel::gp::{gp_condition, ConditionConfig, Kernel, KernelFamily, WarpedSurrogate};
use bqsel::linalg::Matrix;
use bqsel::prior::ParameterPrior;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random surrogate (warped or not), prior and node set, all derived from `seed`.
fn random_belief(seed: u64, n_nodes: usize) -> (EvidenceBelief<f64>, ParameterPrior<f64>, Matrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=2);
    let prior = ParameterPrior::gaussian(
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..d).map(|_| rng.random_range(0.3..1.5)).collect(),
    )
    .unwrap();
    let family =
        [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52][rng.random_range(0..3)];
    let kernel =
        Kernel::new(family, rng.random_range(0.1..3.0), (0..d).map(|_| rng.random_range(0.3..2.0)).collect()).unwrap();
    // Observations at least half a length-scale apart keep the interpolant well conditioned;
    // when the prior is too narrow for `n` such points, fewer are kept.
    let n = rng.random_range(1..=6);
    let min_gap = 0.5 * kernel.length_scales.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x: Matrix<f64> = Matrix::zeros(0, d);
    for _ in 0..200 {
        if x.nrows() == n {
            break;
        }
        let p: Vec<f64> = prior.sample(&mut rng);
        let gap = x
            .rows()
            .map(|r| r.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        if gap >= min_gap {
            x.push_row(&p).unwrap();
        }
    }
    let y: Vec<f64> = (0..x.nrows()).map(|_| rng.random_range(-3.0..0.0)).collect();
    let gp = gp_condition(kernel, rng.random_range(-4.0..0.0), x.clone(), y, &ConditionConfig::default()).unwrap();
    let surrogate = if rng.random_bool(0.7) {
        WarpedSurrogate::log_warped(gp, rng.random_range(-5.0..5.0))
    } else {
        WarpedSurrogate::unwarped(gp)
    };
    let cfg = QuadConfig { n_nodes, k_block: n_nodes, ..Default::default() };
    let nodes = QuadratureNodes::draw(&prior, &cfg, &mut rng);
    (evidence_belief(&surrogate, &prior, &nodes, &cfg).unwrap(), prior, x)
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert<const N: usize>(m: [[f64; N]; N]) -> [[f64; N]; N] {
    let mut a = m;
    let mut inv = [[0.0; N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for k in 0..N {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..N {
            if r != col {
                let f = a[r][col];
                for k in 0..N {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    inv
}

/// Conditional variance of coordinate 0 given coordinate 3 of the joint covariance of
/// `(l, a_1, a_2, b)`: marginalize to `(l, b)`, invert, and read `1 / precision_00`.
fn brute_force_conditional_variance(c: &[[f64; 4]; 4]) -> f64 {
    let marginal = [[c[0][0], c[0][3]], [c[3][0], c[3][3]]];
    1.0 / invert(marginal)[0][0]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn cross_covariance_obeys_cauchy_schwarz(seed in any::<u64>(), t in prop::array::uniform2(-3.0f64..3.0)) {
        let (belief, _, _) = random_belief(seed, 120);
        let theta = &t[..belief.dim()];
        let (_, var) = belief.point_moments(theta);
        let l = belief.cov_profile(theta);
        prop_assert!(l * l <= var * belief.var_k * (1.0 + 1e-9) + 1e-300, "L^2 = {} > {}", l * l, var * belief.var_k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn conditional_entropy_matches_four_by_four_conditioning(
        sigma in 1e-3f64..10.0,
        k1 in 1e-3f64..10.0,
        k2 in 1e-3f64..10.0,
        rho in -0.99f64..0.99,
        z in 0.01f64..0.99,
        first in any::<bool>(),
    ) {
        let (model, k_own) = if first { (ModelIndex::One, k1) } else { (ModelIndex::Two, k2) };
        let l = rho * (sigma * k_own).sqrt();
        let (l1, l2) = if first { (l, 0.0) } else { (0.0, l) };
        let (w1, w2) = (z - 1.0, z);
        let c = [
            [sigma, l1, l2, w1 * l1 + w2 * l2],
            [l1, k1, 0.0, w1 * k1],
            [l2, 0.0, k2, w2 * k2],
            [w1 * l1 + w2 * l2, w1 * k1, w2 * k2, w1 * w1 * k1 + w2 * w2 * k2],
        ];
        // The conditional entropy is 0.5 ln(2 pi e v); compare through v, where relative
        // error is meaningful even when little information is gained.
        let expected = brute_force_conditional_variance(&c);
        let (_, s2) = pivot_moments_raw(1.0, 1.0, k1, k2, z).unwrap();
        let (drop, clamped) = information_from_moments(sigma, l, pivot_weight(model, z), s2);
        prop_assert!(!clamped);
        let got = sigma * (-2.0 * drop).exp();
        prop_assert!((got - expected).abs() <= 1e-8 * expected, "{got} vs {expected}");
    }

    #[test]
    fn pivot_vanishes_at_the_true_ratio(a1 in 1e-6f64..1e6, a2 in 1e-6f64..1e6) {
        let z = a1 / (a1 + a2);
        let b = pivot_weight(ModelIndex::One, z) * a1 + pivot_weight(ModelIndex::Two, z) * a2;
        prop_assert!(b.abs() <= 4.0 * f64::EPSILON * (a1 + a2), "{b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn mutual_information_is_nonnegative_and_vanishes_at_data(seed in any::<u64>(), t in prop::array::uniform2(-3.0f64..3.0)) {
        let (e1, _, x1) = random_belief(seed, 150);
        let (mut e2, _, _) = random_belief(seed.wrapping_add(1), 150);
        if e2.dim() != e1.dim() {
            e2 = random_belief(seed.wrapping_add(2), 150).0;
        }
        let view = joint_view(&e1, &e2);
        prop_assume!(view.degenerate().is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let z = sample_z1(&view, 1000, &mut rng);
        prop_assume!(z.is_ok());
        let z = z.unwrap();
        let rule = GaussHermite::new(32);
        for m in ModelIndex::BOTH {
            let d = view.belief(m).dim();
            let mi = mi_z1(&view, &t[..d], m, &z);
            prop_assert!(mi >= -1e-9, "mi_z1 = {mi}");
            let mc = mi_model_choice(&view, &t[..d], m, &rule);
            prop_assert!(mc >= -1e-9, "mi_model_choice = {mc}");
        }
        let observed = x1.row(0);
        prop_assert!(mi_z1(&view, observed, ModelIndex::One, &z).abs() <= 1e-6);
        prop_assert!(mi_model_choice(&view, observed, ModelIndex::One, &rule).abs() <= 1e-6);
    }
}

#[test]
fn binary_entropy_endpoints_are_exact() {
    assert_eq!(binary_entropy(0.0f64), 0.0);
    assert_eq!(binary_entropy(1.0f64), 0.0);
    assert_eq!(binary_entropy(0.5f64), std::f64::consts::LN_2);
    assert_eq!(binary_entropy(0.0f32), 0.0);
}

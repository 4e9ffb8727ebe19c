use bqsel::bq::{evidence_belief, evidence_belief_closed_form, QuadConfig, QuadratureNodes};
use bqsel::gp::{gp_condition, ConditionConfig, GaussianProcessPosterior, Kernel, KernelFamily, WarpedSurrogate};
use bqsel::linalg::Matrix;
use bqsel::prior::ParameterPrior;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_case(rng: &mut ChaCha8Rng) -> (GaussianProcessPosterior<f64>, ParameterPrior<f64>) {
    let d = rng.random_range(1..=2);
    let prior = ParameterPrior::gaussian(
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..d).map(|_| rng.random_range(0.5..1.5)).collect(),
    )
    .unwrap();
    let kernel = Kernel::new(
        KernelFamily::SquaredExponential,
        rng.random_range(0.5..2.0),
        (0..d).map(|_| rng.random_range(0.5..2.0)).collect(),
    )
    .unwrap();
    let n = rng.random_range(2..=5);
    let x = prior.sample_matrix(n, rng);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let gp = gp_condition(kernel, rng.random_range(0.0..1.0), x, y, &ConditionConfig::default()).unwrap();
    (gp, prior)
}

/// Analytic and Monte Carlo evidence moments agree within four standard errors.
#[test]
fn closed_form_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cfg = QuadConfig { n_nodes: 10_000, force_monte_carlo: true, ..Default::default() };
    for case in 0..50 {
        let (gp, prior) = random_case(&mut rng);
        let exact = evidence_belief_closed_form(&gp, &prior).unwrap();
        let nodes = QuadratureNodes::draw(&prior, &cfg, &mut rng);
        let mc = evidence_belief(&WarpedSurrogate::unwarped(gp.clone()), &prior, &nodes, &cfg).unwrap();
        assert!(
            (mc.mean_m - exact.mean_m).abs() <= 4.0 * mc.mean_se,
            "case {case}: m {} vs {}",
            mc.mean_m,
            exact.mean_m
        );
        assert!((mc.var_k - exact.var_k).abs() <= 4.0 * mc.var_se, "case {case}: K {} vs {}", mc.var_k, exact.var_k);
        let theta = prior.sample(&mut rng);
        let (l, se) = mc.cov_profile_with_se(&theta);
        assert!((l - exact.cov_profile(&theta)).abs() <= 4.0 * se, "case {case}: L");
    }
}

#[test]
fn unit_reference_values_with_many_nodes() {
    let k = Kernel::isotropic(KernelFamily::SquaredExponential, 1.0, 1.0, 1).unwrap();
    let s = WarpedSurrogate::unwarped(GaussianProcessPosterior::prior(k, 0.0).unwrap());
    let prior = ParameterPrior::gaussian(vec![0.0], vec![1.0]).unwrap();
    let cfg = QuadConfig {
        n_nodes: 100_000,
        k_block: 5_000,
        low_discrepancy: true,
        force_monte_carlo: true,
        ..Default::default()
    };
    let nodes = QuadratureNodes::draw(&prior, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
    let b = evidence_belief(&s, &prior, &nodes, &cfg).unwrap();
    assert!((b.var_k - 1.0 / 3f64.sqrt()).abs() < 5e-4, "{}", b.var_k);
    assert!((b.cov_profile(&[0.0]) - 1.0 / 2f64.sqrt()).abs() < 5e-4);
}

#[test]
fn mean_matches_direct_grid_integral() {
    // 1-D posterior mean integrated on a dense grid against N(0.2, 0.8^2)
    let k = Kernel::isotropic(KernelFamily::SquaredExponential, 1.3, 0.7, 1).unwrap();
    let x = Matrix::from_rows(&[[-0.5], [0.3], [1.1]], 1).unwrap();
    let gp = gp_condition(k, 0.4, x, vec![1.0, 2.0, 0.5], &ConditionConfig::default()).unwrap();
    let prior = ParameterPrior::gaussian(vec![0.2], vec![0.8]).unwrap();
    let b = evidence_belief_closed_form(&gp, &prior).unwrap();
    let h = 0.001;
    let mut m = 0.0;
    for i in -8000..8000 {
        let t = 0.2 + (i as f64 + 0.5) * h;
        m += gp.mean(&[t]) * prior.density(&[t]) * h;
    }
    assert!((b.mean_m - m).abs() < 1e-8, "{} vs {m}", b.mean_m);
}

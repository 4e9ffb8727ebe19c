//! Synthetic model-selection tasks: SE-kernel data, SE vs Matérn-5/2 candidates.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use bqsel::gp::{gram, Kernel, KernelFamily};
use bqsel::linalg::{dot, Cholesky, Matrix};
use bqsel::prior::ParameterPrior;
use bqsel::selection::{stream_rng, ModelSpec};
use bqsel_baselines::paired_smc_evidence;

use crate::config::TaskConfig;
use crate::error::{HarnessError, Result};

/// Stream for data locations and values.
pub const TASK_STREAM: u64 = 101;

/// Reference posterior probability from paired simple Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub z1: f64,
    pub z1_se: f64,
    pub log_bayes_factor: f64,
    pub log_evidence: [f64; 2],
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub d: usize,
    pub seed: u64,
    pub config: TaskConfig,
    /// One row per observation.
    pub data_locations: Vec<Vec<f64>>,
    pub data_values: Vec<f64>,
    pub truth: Option<GroundTruth>,
}

/// `log N(y; 0, K + noise I)` for the given kernel, or `-inf` if the factorization fails.
pub fn gp_log_marginal_likelihood(kernel: &Kernel<f64>, x: &Matrix<f64>, y: &[f64], noise_variance: f64) -> f64 {
    let Ok(mut k) = gram(kernel, x) else { return f64::NEG_INFINITY };
    for i in 0..y.len() {
        k[(i, i)] += noise_variance;
    }
    match Cholesky::factor(&k) {
        Ok(c) => -0.5 * (dot(y, &c.solve(y)) + c.log_det() + y.len() as f64 * (2.0 * std::f64::consts::PI).ln()),
        Err(_) => f64::NEG_INFINITY,
    }
}

impl SyntheticTask {
    /// Samples `points_per_dim * d` uniform locations in `[0, 1]^d` and noisy values from the
    /// SE-kernel GP. No ground truth is attached.
    pub fn generate(d: usize, seed: u64, config: &TaskConfig) -> Result<Self> {
        if !(1..=5).contains(&d) {
            return Err(HarnessError::Config(format!("task dimension must lie in 1..=5, got {d}")));
        }
        let n = config.points_per_dim * d;
        let mut rng = stream_rng(seed, TASK_STREAM);
        let locations: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let x = Matrix::from_rows(&locations, d)?;
        let truth =
            Kernel::isotropic(KernelFamily::SquaredExponential, config.signal_variance, config.true_length_scale, d)?;
        let mut k = gram(&truth, &x)?;
        for i in 0..n {
            k[(i, i)] += config.noise_variance;
        }
        let l = Cholesky::factor(&k)?;
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let values = (0..n).map(|i| dot(&l.lower().row(i)[..=i], &z[..=i])).collect();
        Ok(Self { d, seed, config: config.clone(), data_locations: locations, data_values: values, truth: None })
    }

    /// [`generate`](Self::generate) followed by [`attach_ground_truth`](Self::attach_ground_truth).
    pub fn generate_with_truth(d: usize, seed: u64, config: &TaskConfig) -> Result<Self> {
        let mut t = Self::generate(d, seed, config)?;
        t.attach_ground_truth()?;
        Ok(t)
    }

    pub fn prior(&self) -> ParameterPrior<f64> {
        ParameterPrior::DiagonalGaussian {
            mean: vec![self.config.prior_log_mean; self.d],
            sd: vec![self.config.prior_log_sd; self.d],
        }
    }

    /// Candidate 1 (SE, the data-generating family) and candidate 2 (Matérn-5/2), both over
    /// log length-scales with every other hyperparameter at its true value.
    pub fn models(&self) -> Result<[ModelSpec; 2]> {
        let x = Arc::new(Matrix::from_rows(&self.data_locations, self.d)?);
        let y = Arc::new(self.data_values.clone());
        let prior = self.prior();
        prior.validate()?;
        let make = |name: &str, family: KernelFamily| {
            let (x, y) = (Arc::clone(&x), Arc::clone(&y));
            let (sv, nv) = (self.config.signal_variance, self.config.noise_variance);
            ModelSpec::new(name, prior.clone(), move |theta: &[f64]| {
                let kernel =
                    Kernel { family, output_scale: sv, length_scales: theta.iter().map(|t| t.exp()).collect() };
                gp_log_marginal_likelihood(&kernel, &x, &y, nv)
            })
        };
        Ok([make("squared-exponential", KernelFamily::SquaredExponential), make("matern-5/2", KernelFamily::Matern52)])
    }

    /// Paired simple Monte Carlo over `draws` prior samples, doubling the count while the
    /// standard error of `z1` exceeds the configured fraction of `z1`.
    pub fn compute_ground_truth(&self, draws: usize) -> Result<GroundTruth> {
        let models = self.models()?;
        let mut n = draws.max(2);
        let mut doublings = 0;
        loop {
            let p = paired_smc_evidence([&models[0], &models[1]], n, self.seed)?;
            let g = GroundTruth {
                z1: p.z1,
                z1_se: p.z1_se,
                log_bayes_factor: p.log_bayes_factor,
                log_evidence: [p.models[0].log_evidence, p.models[1].log_evidence],
                draws: n,
            };
            if g.z1_se <= self.config.ground_truth_rel_se * g.z1 || doublings >= self.config.ground_truth_doublings {
                if g.z1_se > self.config.ground_truth_rel_se * g.z1 {
                    log::warn!(
                        "ground truth for task seed {} still noisy at {n} draws (se {:.2e})",
                        self.seed,
                        g.z1_se
                    );
                }
                return Ok(g);
            }
            log::info!("ground truth for task seed {} too noisy at {n} draws; doubling", self.seed);
            n *= 2;
            doublings += 1;
        }
    }

    pub fn attach_ground_truth(&mut self) -> Result<GroundTruth> {
        let g = self.compute_ground_truth(self.config.ground_truth_draws)?;
        self.truth = Some(g);
        Ok(g)
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        self.truth.ok_or_else(|| HarnessError::Config(format!("task seed {} has no ground truth", self.seed)))
    }
}

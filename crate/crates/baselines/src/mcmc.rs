use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use bqsel::linalg::Matrix;
use bqsel::selection::{stream_rng, ModelSpec};
use bqsel::{Error, Result};

/// Settings for a random-walk Metropolis chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Initial per-dimension proposal standard deviations.
    pub proposal_scales: Vec<f64>,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(n_iterations: usize, burn_in: usize, proposal_scales: Vec<f64>, seed: u64) -> Self {
        Self { n_iterations, burn_in, thinning: 1, proposal_scales, seed }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::InvalidParameter("burn_in must be below n_iterations".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        if self.proposal_scales.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.proposal_scales.len() });
        }
        if self.proposal_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("proposal scales must be positive".into()));
        }
        Ok(())
    }
}

/// Target acceptance rate for burn-in adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.3;
/// Burn-in iterations between scale updates.
pub const ADAPT_WINDOW: usize = 50;

/// Multiplies `scales` by `exp(rate - target)`-style factors; returns the new scales.
pub(crate) fn adapt_scales(scales: &mut [f64], accepted: usize, window: usize) {
    let rate = accepted as f64 / window as f64;
    let f = (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
    for s in scales.iter_mut() {
        *s *= f;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcOutput {
    /// Thinned post-burn-in states, one per row.
    pub samples: Matrix<f64>,
    /// Log-likelihood at each retained sample.
    pub log_likelihoods: Vec<f64>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Proposal scales frozen at the end of burn-in.
    pub scales: Vec<f64>,
    pub likelihood_evaluations: usize,
    pub warnings: Vec<String>,
}

/// Draws a prior point with a finite log target, retrying up to 100 times.
pub(crate) fn finite_start<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> Result<(Vec<f64>, f64, usize)> {
    for attempt in 1..=100 {
        let t = model.prior.sample(rng);
        let l = model.log_likelihood(&t);
        if l.is_finite() {
            return Ok((t, l, attempt));
        }
        if attempt == 100 {
            return Err(Error::NonFiniteLikelihood { theta: t, attempts: attempt });
        }
    }
    unreachable!()
}

/// Random-walk Metropolis targeting `pi(theta) l(theta)`, started from a prior draw.
///
/// Proposal scales adapt toward [`TARGET_ACCEPTANCE`] during burn-in and are frozen after.
pub fn posterior_mcmc(model: &ModelSpec, cfg: &ChainConfig) -> Result<McmcOutput> {
    let d = model.dim();
    cfg.validate(d)?;
    let mut rng = stream_rng(cfg.seed, 21);
    let (mut theta, mut ll, mut evals) = finite_start(model, &mut rng)?;
    let mut lp = model.prior.log_density(&theta);
    let mut scales = cfg.proposal_scales.clone();
    let mut samples = Matrix::zeros(0, d);
    let mut lls = Vec::new();
    let (mut window_acc, mut post_acc) = (0usize, 0usize);
    let mut prop = vec![0.0; d];
    for it in 0..cfg.n_iterations {
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            prop[k] = theta[k] + scales[k] * z;
        }
        let plp = model.prior.log_density(&prop);
        let mut accepted = false;
        if plp > f64::NEG_INFINITY {
            let pll = model.log_likelihood(&prop);
            evals += 1;
            let log_ratio = plp + pll - lp - ll;
            let u: f64 = rng.random();
            if pll.is_finite() && u.ln() < log_ratio {
                theta.copy_from_slice(&prop);
                ll = pll;
                lp = plp;
                accepted = true;
            }
        }
        if it < cfg.burn_in {
            window_acc += accepted as usize;
            if (it + 1) % ADAPT_WINDOW == 0 {
                adapt_scales(&mut scales, window_acc, ADAPT_WINDOW);
                window_acc = 0;
            }
        } else {
            post_acc += accepted as usize;
            if (it - cfg.burn_in).is_multiple_of(cfg.thinning) {
                samples.push_row(&theta)?;
                lls.push(ll);
            }
        }
    }
    let acceptance_rate = post_acc as f64 / (cfg.n_iterations - cfg.burn_in) as f64;
    let mut warnings = Vec::new();
    if !(0.05..=0.7).contains(&acceptance_rate) {
        log::warn!("random-walk acceptance rate {acceptance_rate:.3} after burn-in");
        warnings.push(format!("acceptance rate {acceptance_rate:.3} outside [0.05, 0.7]"));
    }
    Ok(McmcOutput { samples, log_likelihoods: lls, acceptance_rate, scales, likelihood_evaluations: evals, warnings })
}

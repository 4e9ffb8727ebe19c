use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mcmc::McmcOutput;
use bqsel::linalg::{Cholesky, JitterPolicy, Matrix};
use bqsel::selection::{stream_rng, ModelSpec};
use bqsel::{Error, Result};

/// Multivariate Gaussian with a full covariance.
#[derive(Debug, Clone)]
pub struct GaussianProposal {
    pub mean: Vec<f64>,
    chol: Cholesky<f64>,
    log_norm: f64,
}

impl GaussianProposal {
    pub fn new(mean: Vec<f64>, cov: &Matrix<f64>) -> Result<Self> {
        let d = mean.len();
        let scale = (0..d).map(|i| cov[(i, i)]).sum::<f64>() / d.max(1) as f64;
        let chol = Cholesky::factor_jittered(cov, scale, JitterPolicy::default())?;
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * chol.log_det();
        Ok(Self { mean, chol, log_norm })
    }

    /// Sample mean and covariance of the rows of `x`.
    pub fn fit(x: &Matrix<f64>) -> Result<Self> {
        let (n, d) = (x.nrows(), x.ncols());
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let mut mean = vec![0.0; d];
        for r in x.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n as f64;
            }
        }
        let mut cov = Matrix::zeros(d, d);
        for r in x.rows() {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
        Self::new(mean, &cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let w = self.chol.solve_lower(&diff);
        self.log_norm - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let l = self.chol.lower();
        (0..d).map(|i| self.mean[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub n_proposal: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest accepted number of posterior samples.
    pub min_posterior_samples: usize,
    pub seed: u64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { n_proposal: 10_000, tol: 1e-10, max_iter: 1_000, min_posterior_samples: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResult {
    pub log_evidence: f64,
    pub iterations_to_converge: usize,
    pub relative_change_at_stop: f64,
    pub converged: bool,
    /// Likelihood evaluations spent here (posterior samples are counted by their chain).
    pub likelihood_evaluations: usize,
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

fn log_mean_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + (x - m).exp(), n + 1));
    m + (s / n as f64).ln()
}

/// Optimal-bridge fixed-point iteration on log ratios `log q - log g` at posterior samples
/// (`l_post`) and proposal draws (`l_prop`), entirely in log space.
pub fn bridge_fixed_point(l_post: &[f64], l_prop: &[f64], tol: f64, max_iter: usize) -> Result<BridgeResult> {
    if l_post.is_empty() || l_prop.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: l_post.len().min(l_prop.len()) });
    }
    let (n1, n2) = (l_post.len() as f64, l_prop.len() as f64);
    let ls1 = (n1 / (n1 + n2)).ln();
    let ls2 = (n2 / (n1 + n2)).ln();
    let mut log_r = log_mean_exp(l_prop.iter().copied());
    let mut trace = vec![log_r];
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let num = log_mean_exp(l_prop.iter().map(|&l| l - log_add(ls1 + l, ls2 + log_r)));
        let den = log_mean_exp(l_post.iter().map(|&l| -log_add(ls1 + l, ls2 + log_r)));
        let next = num - den;
        trace.push(next);
        if !next.is_finite() {
            return Err(Error::BridgeDiverged { iteration: it, trace });
        }
        change = (next - log_r).exp_m1().abs();
        log_r = next;
        if change <= tol {
            return Ok(BridgeResult {
                log_evidence: log_r,
                iterations_to_converge: it,
                relative_change_at_stop: change,
                converged: true,
                likelihood_evaluations: 0,
            });
        }
    }
    Ok(BridgeResult {
        log_evidence: log_r,
        iterations_to_converge: max_iter,
        relative_change_at_stop: change,
        converged: false,
        likelihood_evaluations: 0,
    })
}

/// Bridge-sampling evidence from posterior samples.
///
/// The first half of the samples fits a full-covariance Gaussian proposal; the second half
/// enters the bridge estimate together with `n_proposal` proposal draws.
pub fn bridge_sampling(model: &ModelSpec, posterior_samples: &Matrix<f64>, cfg: &BridgeConfig) -> Result<BridgeResult> {
    bridge_impl(model, posterior_samples, None, cfg)
}

/// [`bridge_sampling`] reusing the log-likelihoods stored with a chain's samples.
pub fn bridge_sampling_from_chain(model: &ModelSpec, chain: &McmcOutput, cfg: &BridgeConfig) -> Result<BridgeResult> {
    bridge_impl(model, &chain.samples, Some(&chain.log_likelihoods), cfg)
}

fn bridge_impl(
    model: &ModelSpec,
    samples: &Matrix<f64>,
    lls: Option<&[f64]>,
    cfg: &BridgeConfig,
) -> Result<BridgeResult> {
    let n = samples.nrows();
    if n < cfg.min_posterior_samples.max(4) {
        return Err(Error::InsufficientData { needed: cfg.min_posterior_samples.max(4), got: n });
    }
    if cfg.n_proposal == 0 {
        return Err(Error::InvalidParameter("need at least one proposal draw".into()));
    }
    let half = n / 2;
    let mut fit_rows = Matrix::zeros(0, samples.ncols());
    for i in 0..half {
        fit_rows.push_row(samples.row(i))?;
    }
    let proposal = GaussianProposal::fit(&fit_rows)?;
    let mut evals = 0usize;
    let mut log_q = |t: &[f64], ll: Option<f64>| {
        let lp = model.prior.log_density(t);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let l = ll.unwrap_or_else(|| {
            evals += 1;
            model.log_likelihood(t)
        });
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp + l
        }
    };
    let l_post: Vec<f64> =
        (half..n).map(|i| log_q(samples.row(i), lls.map(|v| v[i])) - proposal.log_density(samples.row(i))).collect();
    let mut rng = stream_rng(cfg.seed, 31);
    let l_prop: Vec<f64> = (0..cfg.n_proposal)
        .map(|_| {
            let t = proposal.sample(&mut rng);
            log_q(&t, None) - proposal.log_density(&t)
        })
        .collect();
    let mut r = bridge_fixed_point(&l_post, &l_prop, cfg.tol, cfg.max_iter)?;
    r.likelihood_evaluations = evals;
    Ok(r)
}

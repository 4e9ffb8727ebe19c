use serde::{Deserialize, Serialize};

use bqsel::selection::{stream_rng, ModelSpec};
use bqsel::{Error, Result};

/// Simple Monte Carlo evidence estimate, kept on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcEstimate {
    pub log_evidence: f64,
    /// Standard error of `log_evidence` (delta method).
    pub log_se: f64,
    /// Draws with a finite log-likelihood.
    pub n_used: usize,
}

impl SmcEstimate {
    pub fn evidence(&self) -> f64 {
        self.log_evidence.exp()
    }

    /// Standard error on the evidence scale.
    pub fn standard_error(&self) -> f64 {
        self.evidence() * self.log_se
    }
}

/// Running log-sum-exp accumulator of `exp(l)` and `exp(2 l)`.
#[derive(Debug, Clone, Copy)]
struct LogMoments {
    shift: f64,
    s1: f64,
    s2: f64,
    n: usize,
}

impl LogMoments {
    fn from_values(values: &[f64]) -> Option<Self> {
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let shift = finite.clone().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return None;
        }
        let (mut s1, mut s2, mut n) = (0.0, 0.0, 0);
        for v in finite {
            let w = (v - shift).exp();
            s1 += w;
            s2 += w * w;
            n += 1;
        }
        Some(Self { shift, s1, s2, n })
    }

    fn estimate(&self) -> SmcEstimate {
        let n = self.n as f64;
        let mean = self.s1 / n;
        let var = if self.n > 1 { ((self.s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        SmcEstimate { log_evidence: self.shift + mean.ln(), log_se: (var / n).sqrt() / mean, n_used: self.n }
    }
}

/// Stream used for the prior draws of [`smc_evidence`].
pub const SMC_STREAM: u64 = 11;

/// `log mean_j l(theta_j)` over `n` i.i.d. prior draws.
pub fn smc_evidence(model: &ModelSpec, n: usize, seed: u64) -> Result<SmcEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    let mut rng = stream_rng(seed, SMC_STREAM);
    let values: Vec<f64> = (0..n).map(|_| model.log_likelihood(&model.prior.sample(&mut rng))).collect();
    smc_from_log_likelihoods(&values)
}

/// [`smc_evidence`] from precomputed log-likelihoods at prior draws (non-finite values skipped).
pub fn smc_from_log_likelihoods(values: &[f64]) -> Result<SmcEstimate> {
    LogMoments::from_values(values).map(|m| m.estimate()).ok_or(Error::NonFinite("every log-likelihood draw"))
}

/// Two evidences from shared prior draws, and the implied `z_1` with equal model priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSmc {
    pub models: [SmcEstimate; 2],
    pub z1: f64,
    /// Delta-method standard error of `z1`, including the covariance of the shared draws.
    pub z1_se: f64,
    pub log_bayes_factor: f64,
}

/// Paired simple Monte Carlo with common random numbers. Both priors must be identical.
pub fn paired_smc_evidence(models: [&ModelSpec; 2], n: usize, seed: u64) -> Result<PairedSmc> {
    if models[0].prior != models[1].prior {
        return Err(Error::InvalidParameter("paired estimation needs identical priors".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    let mut rng = stream_rng(seed, SMC_STREAM);
    let mut l1 = Vec::with_capacity(n);
    let mut l2 = Vec::with_capacity(n);
    for _ in 0..n {
        let t = models[0].prior.sample(&mut rng);
        l1.push(models[0].log_likelihood(&t));
        l2.push(models[1].log_likelihood(&t));
    }
    paired_from_log_likelihoods(&l1, &l2)
}

/// [`paired_smc_evidence`] from precomputed paired log-likelihoods.
pub fn paired_from_log_likelihoods(l1: &[f64], l2: &[f64]) -> Result<PairedSmc> {
    let e1 = smc_from_log_likelihoods(l1)?;
    let e2 = smc_from_log_likelihoods(l2)?;
    let shift = l1.iter().chain(l2).copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let w = |v: f64| if v.is_finite() { (v - shift).exp() } else { 0.0 };
    let n = l1.len() as f64;
    let (mut a, mut b, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in l1.iter().zip(l2) {
        let (u, v) = (w(x), w(y));
        a += u;
        b += v;
        aa += u * u;
        bb += v * v;
        ab += u * v;
    }
    let (ma, mb) = (a / n, b / n);
    let var_a = (aa / n - ma * ma) * n / (n - 1.0);
    let var_b = (bb / n - mb * mb) * n / (n - 1.0);
    let cov = (ab / n - ma * mb) * n / (n - 1.0);
    let s = ma + mb;
    let z1 = ma / s;
    let var_z = (mb * mb * var_a - 2.0 * ma * mb * cov + ma * ma * var_b) / s.powi(4) / n;
    Ok(PairedSmc {
        models: [e1, e2],
        z1,
        z1_se: var_z.max(0.0).sqrt(),
        log_bayes_factor: e1.log_evidence - e2.log_evidence,
    })
}

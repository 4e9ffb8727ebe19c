use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mcmc::{adapt_scales, finite_start, ChainConfig, ADAPT_WINDOW};
use bqsel::selection::{stream_rng, ModelSpec};
use bqsel::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RjOutput {
    /// Post-burn-in fraction of iterations spent in model 1.
    pub z1: f64,
    /// Batch-means standard error of `z1`.
    pub z1_se: f64,
    /// Post-burn-in iterations spent in each model.
    pub visits: [usize; 2],
    pub jumps_proposed: usize,
    pub jumps_accepted: usize,
    pub within_acceptance: [f64; 2],
    pub likelihood_evaluations: usize,
    /// Model index (0 or 1) after each post-burn-in iteration.
    pub trace: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Settings specific to the reversible-jump sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RjConfig {
    pub chain: ChainConfig,
    pub jump_prob: f64,
    /// Allow models of different dimension; extra coordinates are drawn from the larger
    /// model's prior when jumping up and dropped when jumping down.
    pub allow_unequal_dims: bool,
}

impl RjConfig {
    pub fn new(chain: ChainConfig, jump_prob: f64) -> Self {
        Self { chain, jump_prob, allow_unequal_dims: false }
    }
}

/// Default probability of proposing a model switch.
pub const DEFAULT_JUMP_PROB: f64 = 0.25;

/// Reversible-jump chain over `(model, theta)` with equal model priors.
///
/// Jumps keep `theta` (identity map, unit Jacobian); otherwise a random-walk Metropolis move is
/// made within the current model. The chain's initial proposal scales apply to both models.
pub fn rjmcmc(models: [&ModelSpec; 2], cfg: &RjConfig) -> Result<RjOutput> {
    let dims = [models[0].dim(), models[1].dim()];
    if dims[0] != dims[1] && !cfg.allow_unequal_dims {
        return Err(Error::InvalidParameter(format!("model dimensions differ ({} vs {})", dims[0], dims[1])));
    }
    if !(0.0..1.0).contains(&cfg.jump_prob) {
        return Err(Error::InvalidParameter(format!("jump_prob must lie in [0, 1), got {}", cfg.jump_prob)));
    }
    let c = &cfg.chain;
    if c.burn_in >= c.n_iterations {
        return Err(Error::InvalidParameter("burn_in must be below n_iterations".into()));
    }
    let dmax = dims[0].max(dims[1]);
    if c.proposal_scales.len() < dmax || c.proposal_scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("need a positive proposal scale per dimension".into()));
    }
    let mut rng = stream_rng(c.seed, 41);
    let mut scales = [c.proposal_scales[..dims[0]].to_vec(), c.proposal_scales[..dims[1]].to_vec()];
    let mut k = 0usize;
    let (mut theta, mut ll, mut evals) = finite_start(models[0], &mut rng)?;
    let mut lp = models[0].prior.log_density(&theta);

    let mut visits = [0usize; 2];
    let (mut jumps_proposed, mut jumps_accepted) = (0usize, 0usize);
    let mut within = [(0usize, 0usize); 2];
    let mut window = [(0usize, 0usize); 2];
    let mut trace = Vec::with_capacity(c.n_iterations - c.burn_in);
    for it in 0..c.n_iterations {
        let burning = it < c.burn_in;
        let u: f64 = rng.random();
        if u < cfg.jump_prob {
            let j = 1 - k;
            if !burning {
                jumps_proposed += 1;
            }
            // identity on shared coordinates; pad from the target prior or drop
            let mut prop: Vec<f64> = theta[..dims[j].min(dims[k])].to_vec();
            let mut log_pad = 0.0;
            if dims[j] > dims[k] {
                let extra = models[j].prior.sample_dims(&mut rng, dims[k]..dims[j]);
                log_pad -= models[j].prior.log_density_dims(&[prop.clone(), extra.clone()].concat(), dims[k]..dims[j]);
                prop.extend(extra);
            } else if dims[j] < dims[k] {
                log_pad += models[k].prior.log_density_dims(&theta, dims[j]..dims[k]);
            }
            let plp = models[j].prior.log_density(&prop);
            if plp > f64::NEG_INFINITY {
                let pll = models[j].log_likelihood(&prop);
                evals += 1;
                let a: f64 = rng.random();
                if pll.is_finite() && a.ln() < plp + pll - lp - ll + log_pad {
                    k = j;
                    theta = prop;
                    ll = pll;
                    lp = plp;
                    if !burning {
                        jumps_accepted += 1;
                    }
                }
            }
        } else {
            let prop: Vec<f64> = theta
                .iter()
                .zip(&scales[k])
                .map(|(t, s)| {
                    let z: f64 = rng.sample(StandardNormal);
                    t + s * z
                })
                .collect();
            let plp = models[k].prior.log_density(&prop);
            let mut accepted = false;
            if plp > f64::NEG_INFINITY {
                let pll = models[k].log_likelihood(&prop);
                evals += 1;
                let a: f64 = rng.random();
                if pll.is_finite() && a.ln() < plp + pll - lp - ll {
                    theta = prop;
                    ll = pll;
                    lp = plp;
                    accepted = true;
                }
            }
            if burning {
                window[k].0 += 1;
                window[k].1 += accepted as usize;
                if window[k].0 == ADAPT_WINDOW {
                    adapt_scales(&mut scales[k], window[k].1, ADAPT_WINDOW);
                    window[k] = (0, 0);
                }
            } else {
                within[k].0 += 1;
                within[k].1 += accepted as usize;
            }
        }
        if !burning {
            visits[k] += 1;
            trace.push(k as u8);
        }
    }
    let kept = (c.n_iterations - c.burn_in) as f64;
    let z1 = visits[0] as f64 / kept;
    let mut warnings = Vec::new();
    if visits[0] == 0 || visits[1] == 0 {
        log::warn!("reversible-jump chain never visited one of the models");
        warnings.push("non-mixing: one model never visited".to_string());
    }
    if jumps_accepted == 0 {
        warnings.push("no accepted model switches".to_string());
    }
    let rate = |(n, a): (usize, usize)| if n == 0 { f64::NAN } else { a as f64 / n as f64 };
    Ok(RjOutput {
        z1,
        z1_se: batch_means_se(&trace),
        visits,
        jumps_proposed,
        jumps_accepted,
        within_acceptance: [rate(within[0]), rate(within[1])],
        likelihood_evaluations: evals,
        trace,
        warnings,
    })
}

/// Standard error of the mean of a model-1 indicator by non-overlapping batch means
/// (about `sqrt(n)` batches).
fn batch_means_se(trace: &[u8]) -> f64 {
    let n = trace.len();
    let b = (n as f64).sqrt().floor().max(1.0) as usize;
    let size = n / b;
    if b < 2 || size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| trace[i * size..(i + 1) * size].iter().filter(|&&k| k == 0).count() as f64 / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

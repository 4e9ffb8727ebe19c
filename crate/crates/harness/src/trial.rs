//! One method run on one task, reduced to a trace of metric rows.

use serde::{Deserialize, Serialize};

use bqsel::selection::{EstimateSnapshot, ModelSpec, Policy, SelectionState};
use bqsel_baselines::{bridge_sampling_from_chain, posterior_mcmc, rjmcmc, BridgeConfig, ChainConfig, RjConfig};

use crate::config::{ExperimentConfig, Method};
use crate::error::Result;
use crate::task::{GroundTruth, SyntheticTask};

/// One CSV row. Column order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub d: usize,
    pub trial: usize,
    pub method: Method,
    pub iteration: usize,
    pub evals: usize,
    pub z1_hat: f64,
    pub z1_true: f64,
    pub frac_err: f64,
    pub abs_err_logbf: f64,
    /// Empty when there is no estimate.
    pub correct_choice: Option<bool>,
    /// `|`-separated.
    pub flags: String,
}

pub const FLAG_ERROR: &str = "error";
pub const FLAG_INITIALIZING: &str = "initializing";
pub const FLAG_NO_ESTIMATE: &str = "no-estimate";

impl TraceRow {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split('|').any(|f| f == flag)
    }

    pub fn is_failure(&self) -> bool {
        self.has_flag(FLAG_ERROR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub rows: Vec<TraceRow>,
    /// Likelihood evaluations actually spent (the largest checkpoint for Monte Carlo methods).
    pub evaluations: usize,
    pub failed: bool,
}

/// Identifies a trial inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialKey {
    pub d: usize,
    pub trial: usize,
    pub method: Method,
}

fn logit(z: f64) -> f64 {
    z.ln() - (-z).ln_1p()
}

struct Estimate {
    z1: f64,
    log_bayes_factor: f64,
}

fn row(
    key: TrialKey,
    iteration: usize,
    evals: usize,
    est: Option<Estimate>,
    truth: &GroundTruth,
    flags: Vec<String>,
) -> TraceRow {
    let (z1_hat, frac_err, abs_err_logbf, correct_choice) = match est {
        Some(e) if e.z1.is_finite() => (
            e.z1,
            (e.z1 - truth.z1).abs() / truth.z1,
            (e.log_bayes_factor - truth.log_bayes_factor).abs(),
            Some((e.z1 > 0.5) == (truth.z1 > 0.5)),
        ),
        _ => (f64::NAN, f64::NAN, f64::NAN, None),
    };
    TraceRow {
        d: key.d,
        trial: key.trial,
        method: key.method,
        iteration,
        evals,
        z1_hat,
        z1_true: truth.z1,
        frac_err,
        abs_err_logbf,
        correct_choice,
        flags: flags.join("|"),
    }
}

fn sanitize(msg: &str) -> String {
    msg.chars().map(|c| if c.is_alphanumeric() { c } else { '-' }).take(48).collect()
}

/// Runs `method` on `task` until `budget` likelihood evaluations are spent.
///
/// Method-level errors end the trace with a row flagged `error`; they are not returned.
pub fn run_trial(
    task: &SyntheticTask,
    key: TrialKey,
    budget: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<TrialOutcome> {
    let truth = task.truth()?;
    let models = task.models()?;
    Ok(match key.method {
        Method::MiZ1 => run_quadrature(models, Policy::MiZ1, key, budget, seed, cfg, &truth),
        Method::MiModelChoice => run_quadrature(models, Policy::MiModelChoice, key, budget, seed, cfg, &truth),
        Method::RoundRobinUs => run_quadrature(models, Policy::RoundRobinUs, key, budget, seed, cfg, &truth),
        Method::Bridge => run_checkpoints(key, budget, cfg, &truth, |e| bridge_at(&models, e, seed, task.d, cfg)),
        Method::Rjmcmc => run_checkpoints(key, budget, cfg, &truth, |e| rj_at(&models, e, seed, task.d, cfg)),
    })
}

fn snapshot_row(key: TrialKey, s: &EstimateSnapshot, truth: &GroundTruth) -> TraceRow {
    let est = Estimate { z1: s.z1_plug_in, log_bayes_factor: s.log_bayes_factor };
    row(key, s.iteration, s.evaluations, Some(est), truth, s.flags.clone())
}

fn failure_row(key: TrialKey, iteration: usize, evals: usize, truth: &GroundTruth, err: &bqsel::Error) -> TraceRow {
    log::warn!("d={} trial={} {}: {err}", key.d, key.trial, key.method);
    row(key, iteration, evals, None, truth, vec![FLAG_ERROR.into(), sanitize(&err.to_string())])
}

fn run_quadrature(
    models: [ModelSpec; 2],
    policy: Policy,
    key: TrialKey,
    budget: usize,
    seed: u64,
    cfg: &ExperimentConfig,
    truth: &GroundTruth,
) -> TrialOutcome {
    let sc = cfg.bq.selection_config(key.d, budget, seed);
    let init = 2 * sc.init_per_model;
    let mut rows: Vec<TraceRow> =
        (1..init.min(budget + 1)).map(|e| row(key, 0, e, None, truth, vec![FLAG_INITIALIZING.into()])).collect();
    let mut state = match SelectionState::initialize(models, sc) {
        Ok(s) => s,
        Err(e) => {
            rows.push(failure_row(key, 0, 0, truth, &e));
            return TrialOutcome { rows, evaluations: 0, failed: true };
        }
    };
    rows.push(snapshot_row(key, &state.snapshot(), truth));
    while state.remaining() > 0 {
        match state.step(policy) {
            Ok(s) => rows.push(snapshot_row(key, &s, truth)),
            Err(e) => {
                rows.push(failure_row(key, state.iteration + 1, state.evaluations_used(), truth, &e));
                return TrialOutcome { rows, evaluations: state.evaluations_used(), failed: true };
            }
        }
    }
    TrialOutcome { rows, evaluations: state.evaluations_used(), failed: false }
}

/// Checkpoints every `checkpoint_every` evaluations, plus the budget itself.
pub fn checkpoints(budget: usize, every: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (1..).map(|k| k * every).take_while(|&e| e <= budget).collect();
    if c.last() != Some(&budget) && budget > 0 {
        c.push(budget);
    }
    c
}

/// Outcome of a Monte Carlo method at one checkpoint.
enum McResult {
    Estimate {
        z1: f64,
        log_bayes_factor: f64,
        evaluations: usize,
        flags: Vec<String>,
    },
    /// The budget is too small for this method to produce a number.
    NoEstimate(String),
    Failed(bqsel::Error),
}

fn run_checkpoints(
    key: TrialKey,
    budget: usize,
    cfg: &ExperimentConfig,
    truth: &GroundTruth,
    mut at: impl FnMut(usize) -> McResult,
) -> TrialOutcome {
    let mut rows = Vec::new();
    let mut evaluations = 0;
    for (k, e) in checkpoints(budget, cfg.mc.checkpoint_every).into_iter().enumerate() {
        match at(e) {
            McResult::Estimate { z1, log_bayes_factor, evaluations: used, flags } => {
                debug_assert!(used <= e, "{} spent {used} of {e}", key.method);
                evaluations = e;
                rows.push(row(key, k + 1, e, Some(Estimate { z1, log_bayes_factor }), truth, flags));
            }
            McResult::NoEstimate(why) => {
                evaluations = e;
                rows.push(row(key, k + 1, e, None, truth, vec![FLAG_NO_ESTIMATE.into(), sanitize(&why)]));
            }
            McResult::Failed(err) => {
                rows.push(failure_row(key, k + 1, e, truth, &err));
                return TrialOutcome { rows, evaluations, failed: true };
            }
        }
    }
    TrialOutcome { rows, evaluations, failed: false }
}

/// Seed for model `i`'s chain.
fn chain_seed(seed: u64, i: usize) -> u64 {
    crate::seeds::derive(seed, 0xB41D_6E00 + i as u64)
}

fn bridge_at(models: &[ModelSpec; 2], e: usize, seed: u64, d: usize, cfg: &ExperimentConfig) -> McResult {
    let shares = [e.div_ceil(2), e / 2];
    let mut log_ev = [0.0; 2];
    let mut used = 0;
    for (i, m) in models.iter().enumerate() {
        let b = shares[i];
        let chain_budget = ((b as f64) * cfg.mc.bridge_chain_share).floor() as usize;
        let iters = chain_budget.saturating_sub(1);
        let burn = ((iters as f64) * cfg.mc.burn_in_fraction).floor() as usize;
        let min_samples = 2 * (d + 1);
        if iters <= burn || iters - burn < min_samples {
            return McResult::NoEstimate(format!("{} posterior samples", iters.saturating_sub(burn)));
        }
        let scales = proposal_scales(m, cfg);
        let chain = match posterior_mcmc(m, &ChainConfig::new(iters, burn, scales, chain_seed(seed, i))) {
            Ok(c) => c,
            Err(err) => return McResult::Failed(err),
        };
        let n_proposal = b.saturating_sub(chain.likelihood_evaluations);
        if n_proposal == 0 {
            return McResult::NoEstimate("no proposal draws left".into());
        }
        let bc = BridgeConfig {
            n_proposal,
            min_posterior_samples: min_samples,
            seed: chain_seed(seed, i),
            ..BridgeConfig::default()
        };
        match bridge_sampling_from_chain(m, &chain, &bc) {
            Ok(r) => {
                log_ev[i] = r.log_evidence;
                used += chain.likelihood_evaluations + r.likelihood_evaluations;
            }
            Err(err @ (bqsel::Error::NotPositiveDefinite { .. } | bqsel::Error::InsufficientData { .. })) => {
                return McResult::NoEstimate(err.to_string());
            }
            Err(err) => return McResult::Failed(err),
        }
    }
    let lbf = log_ev[0] - log_ev[1];
    let z1 = 1.0 / (1.0 + (-lbf).exp());
    McResult::Estimate { z1, log_bayes_factor: lbf, evaluations: used, flags: Vec::new() }
}

fn rj_at(models: &[ModelSpec; 2], e: usize, seed: u64, d: usize, cfg: &ExperimentConfig) -> McResult {
    let iters = e.saturating_sub(1);
    let burn = ((iters as f64) * cfg.mc.burn_in_fraction).floor() as usize;
    if iters <= burn {
        return McResult::NoEstimate("chain too short".into());
    }
    let scales = proposal_scales(&models[0], cfg);
    debug_assert_eq!(scales.len(), d);
    let rc = RjConfig::new(ChainConfig::new(iters, burn, scales, chain_seed(seed, 2)), cfg.mc.jump_prob);
    match rjmcmc([&models[0], &models[1]], &rc) {
        Ok(out) => {
            let mut flags = out.warnings.iter().map(|w| sanitize(w)).collect::<Vec<_>>();
            if out.visits[0] == 0 || out.visits[1] == 0 {
                flags.push("single-model".into());
            }
            McResult::Estimate {
                z1: out.z1,
                log_bayes_factor: logit(out.z1),
                evaluations: out.likelihood_evaluations,
                flags,
            }
        }
        Err(err) => McResult::Failed(err),
    }
}

fn proposal_scales(m: &ModelSpec, cfg: &ExperimentConfig) -> Vec<f64> {
    match &m.prior {
        bqsel::prior::ParameterPrior::DiagonalGaussian { sd, .. } => {
            sd.iter().map(|s| s * cfg.mc.initial_step).collect()
        }
        bqsel::prior::ParameterPrior::UniformBox { lower, upper } => {
            lower.iter().zip(upper).map(|(l, u)| (u - l) * 0.25 * cfg.mc.initial_step).collect()
        }
    }
}

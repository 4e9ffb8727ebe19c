//! The active model-selection loop.
//!
//! [`SelectionState::initialize`] evaluates a few prior draws per model and builds the first
//! beliefs; each [`SelectionState::step`] spends one likelihood evaluation where the chosen
//! [`Policy`] points, rebuilds that model's belief and records an [`EstimateSnapshot`].
//!
//! Every random choice comes from a ChaCha8 stream keyed by `(seed, stream)`; see
//! [`stream_rng`] and the `STREAM_*` constants. Both models draw their initial points and
//! quadrature nodes from the same streams, so identical models get identical beliefs.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    sample_z1, select_next, select_next_model_choice, uncertainty_sampling, AcquisitionResult, OptConfig,
    PosteriorProbabilityBelief, MIN_Z1_SAMPLES,
};
use crate::bq::{
    evidence_belief, joint_view, EvidenceBelief, JointEvidenceView, ModelIndex, QuadConfig, QuadratureNodes,
};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, gp_condition, FitConfig, Kernel, KernelFamily, MeanMode, WarpedSurrogate};
use crate::linalg::Matrix;
use crate::prior::ParameterPrior;

/// Log-likelihood of a parameter vector.
pub type LogLikelihood = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A candidate model: prior, log-likelihood and the kernel family of its surrogate.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub prior: ParameterPrior<f64>,
    pub likelihood: LogLikelihood,
    pub kernel_family: KernelFamily,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("prior", &self.prior)
            .field("kernel_family", &self.kernel_family)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// Model with a Matérn-3/2 surrogate.
    pub fn new<F>(name: impl Into<String>, prior: ParameterPrior<f64>, likelihood: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), prior, likelihood: Arc::new(likelihood), kernel_family: KernelFamily::Matern32 }
    }

    pub fn with_kernel_family(mut self, family: KernelFamily) -> Self {
        self.kernel_family = family;
        self
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        (self.likelihood)(theta)
    }
}

/// How the next evaluation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Maximize mutual information with `z_1` across both spaces.
    MiZ1,
    /// Maximize mutual information with `[z_1 > z_2]`.
    MiModelChoice,
    /// Alternate models (model 1 first), uncertainty sampling within each.
    RoundRobinUs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub init_per_model: usize,
    /// Total likelihood evaluations, initialization included.
    pub budget: usize,
    pub quad: QuadConfig,
    pub opt: OptConfig,
    pub fit: FitConfig,
    pub z_samples: usize,
    /// Hyperparameters are refit on steps whose index is a multiple of this; in between the
    /// previous kernel is reused. Must be at least 1.
    pub refit_every: usize,
    /// Re-draws allowed per initialization point when the likelihood is not finite.
    pub max_redraws: usize,
    pub seed: u64,
}

impl SelectionConfig {
    /// Library defaults for a `d`-dimensional pair: `5d` initial points per model and a total
    /// budget of `50d`.
    pub fn for_dim(d: usize, seed: u64) -> Self {
        Self {
            init_per_model: 5 * d,
            budget: 50 * d,
            quad: QuadConfig::default(),
            opt: OptConfig::default(),
            fit: FitConfig { mean: MeanMode::Minimum, ..FitConfig::default() },
            z_samples: 10_000,
            refit_every: 1,
            max_redraws: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.init_per_model < 2 {
            return bad("need at least 2 initial points per model".into());
        }
        if self.refit_every == 0 {
            return bad("refit_every must be at least 1".into());
        }
        if self.budget < 2 * self.init_per_model {
            return bad(format!("budget {} is below the initialization cost {}", self.budget, 2 * self.init_per_model));
        }
        if self.z_samples < MIN_Z1_SAMPLES {
            return bad(format!("need at least {MIN_Z1_SAMPLES} z1 samples, got {}", self.z_samples));
        }
        Ok(())
    }
}

/// One likelihood evaluation. Initialization entries have `iteration == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub model: ModelIndex,
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
}

/// Estimates after an iteration (iteration 0 is the post-initialization state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSnapshot {
    pub iteration: usize,
    pub evaluations: usize,
    /// Reconciled evidence means and variances (both scaled by `exp(-log_offset)`).
    pub m1: f64,
    pub m2: f64,
    pub k1: f64,
    pub k2: f64,
    pub log_offset: f64,
    /// `m_1 / (m_1 + m_2)` with offsets.
    pub z1_plug_in: f64,
    /// Mean of the sampled `z_1` belief.
    pub z1_mean: f64,
    pub log_bayes_factor: f64,
    pub chosen: Option<ModelIndex>,
    pub theta: Option<Vec<f64>>,
    pub acquisition_score: Option<f64>,
    pub flags: Vec<String>,
}

/// Per-model data and beliefs.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub x: Matrix<f64>,
    pub y: Vec<f64>,
    pub kernel: Kernel<f64>,
    pub mean_const: f64,
    pub fit_fallback: bool,
    pub nodes: QuadratureNodes<f64>,
    pub belief: EvidenceBelief<f64>,
}

pub const STREAM_INIT: u64 = 1;
pub const STREAM_NODES: u64 = 3;
pub const STREAM_INIT_Z: u64 = 5;
/// Step `t` (1-based) draws from stream `STREAM_STEP + t`.
pub const STREAM_STEP: u64 = 1_000;

/// ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Seed for hyperparameter fits at `iteration` (splitmix64 of the inputs).
pub fn fit_seed(seed: u64, iteration: usize) -> u64 {
    let mut z = seed ^ (iteration as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fits the log-likelihood surrogate for one model and integrates it.
///
/// With `fixed = Some(kernel, mean)` the hyperparameters are reused instead of refit.
#[allow(clippy::too_many_arguments)]
pub fn fit_model_belief(
    spec: &ModelSpec,
    x: &Matrix<f64>,
    y: &[f64],
    nodes: &QuadratureNodes<f64>,
    cfg: &SelectionConfig,
    fit_seed: u64,
    warm: Option<&Kernel<f64>>,
    fixed: Option<(&Kernel<f64>, f64)>,
) -> Result<ModelState> {
    let offset = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let (kernel, mean_const, fit_fallback) = match fixed {
        Some((k, m)) => (k.clone(), m, false),
        None => {
            let fc = FitConfig { seed: fit_seed, ..cfg.fit.clone() };
            let r = fit_hyperparameters(x, &g, spec.kernel_family, &fc, warm)?;
            (r.kernel, r.mean_const, r.fallback)
        }
    };
    let gp = gp_condition(kernel.clone(), mean_const, x.clone(), g, &cfg.fit.condition)?;
    let surrogate = WarpedSurrogate::log_warped(gp, offset);
    let belief = evidence_belief(&surrogate, &spec.prior, nodes, &cfg.quad)?;
    Ok(ModelState { x: x.clone(), y: y.to_vec(), kernel, mean_const, fit_fallback, nodes: nodes.clone(), belief })
}

/// Refreshes the `z_1` belief; a degenerate view yields a point mass at the plug-in value.
pub fn refresh_z_belief(
    view: &JointEvidenceView<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PosteriorProbabilityBelief<f64>> {
    if view.degenerate().is_some() {
        return Ok(PosteriorProbabilityBelief::point_mass(view.plug_in_z1()));
    }
    match sample_z1(view, n, rng) {
        Err(Error::ExcessiveRejection { .. }) => Ok(PosteriorProbabilityBelief::point_mass(view.plug_in_z1())),
        other => other,
    }
}

/// `p_1 m_1 / (p_1 m_1 + p_2 m_2)`; a non-positive mean gets zero weight.
pub fn posterior_probability(m1: f64, m2: f64, model_priors: (f64, f64)) -> Result<f64> {
    let (p1, p2) = model_priors;
    if !(p1 >= 0.0 && p2 >= 0.0 && ((p1 + p2) - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "model priors must be nonnegative and sum to one, got ({p1}, {p2})"
        )));
    }
    let w1 = p1 * m1.max(0.0);
    let w2 = p2 * m2.max(0.0);
    if !(w1 + w2 > 0.0) {
        return Err(Error::NonPositiveEvidence);
    }
    Ok(w1 / (w1 + w2))
}

/// Everything the loop carries between steps.
#[derive(Debug, Clone)]
pub struct SelectionState {
    pub models: [ModelSpec; 2],
    pub per_model: [ModelState; 2],
    pub z_belief: PosteriorProbabilityBelief<f64>,
    pub history: Vec<HistoryEntry>,
    pub iteration: usize,
    pub config: SelectionConfig,
    pub last_acquisition: Option<AcquisitionResult>,
}

impl SelectionState {
    /// Draws `init_per_model` points from each prior, evaluates them and builds the beliefs.
    pub fn initialize(models: [ModelSpec; 2], config: SelectionConfig) -> Result<Self> {
        config.validate()?;
        let mut history = Vec::new();
        let mut states = Vec::with_capacity(2);
        for m in ModelIndex::BOTH {
            let spec = &models[m.index()];
            spec.prior.validate()?;
            let mut rng = stream_rng(config.seed, STREAM_INIT);
            let mut x = Matrix::zeros(0, spec.dim());
            let mut y = Vec::new();
            for _ in 0..config.init_per_model {
                let mut attempts = 0;
                loop {
                    attempts += 1;
                    let theta = spec.prior.sample(&mut rng);
                    let v = spec.log_likelihood(&theta);
                    if v.is_finite() {
                        x.push_row(&theta)?;
                        y.push(v);
                        history.push(HistoryEntry { iteration: 0, model: m, theta, log_likelihood: v });
                        break;
                    }
                    if attempts > config.max_redraws {
                        return Err(Error::NonFiniteLikelihood { theta, attempts });
                    }
                }
            }
            let mut nrng = stream_rng(config.seed, STREAM_NODES);
            let nodes = QuadratureNodes::draw(&spec.prior, &config.quad, &mut nrng);
            states.push(fit_model_belief(spec, &x, &y, &nodes, &config, fit_seed(config.seed, 0), None, None)?);
        }
        let per_model: [ModelState; 2] = states.try_into().expect("two models");
        let view = joint_view(&per_model[0].belief, &per_model[1].belief);
        let z_belief = refresh_z_belief(&view, config.z_samples, &mut stream_rng(config.seed, STREAM_INIT_Z))?;
        Ok(Self { models, per_model, z_belief, history, iteration: 0, config, last_acquisition: None })
    }

    pub fn evaluations_used(&self) -> usize {
        self.history.len()
    }

    pub fn remaining(&self) -> usize {
        self.config.budget.saturating_sub(self.history.len())
    }

    pub fn view(&self) -> JointEvidenceView<f64> {
        joint_view(&self.per_model[0].belief, &self.per_model[1].belief)
    }

    pub fn priors(&self) -> [&ParameterPrior<f64>; 2] {
        [&self.models[0].prior, &self.models[1].prior]
    }

    /// Chooses the next `(model, theta)` for `policy` without evaluating it.
    pub fn propose(&self, policy: Policy, rng: &mut ChaCha8Rng) -> AcquisitionResult {
        let view = self.view();
        let cfg = &self.config.opt;
        match policy {
            Policy::MiZ1 => select_next(&view, self.priors(), &self.z_belief, cfg, rng),
            Policy::MiModelChoice => select_next_model_choice(&view, self.priors(), cfg, rng),
            Policy::RoundRobinUs => {
                let model = if self.iteration.is_multiple_of(2) { ModelIndex::One } else { ModelIndex::Two };
                let i = model.index();
                let c = uncertainty_sampling(self.per_model[i].belief.surrogate(), &self.models[i].prior, cfg, rng);
                AcquisitionResult {
                    model,
                    theta: c.theta,
                    score: c.score,
                    candidates_evaluated: c.evaluations,
                    model_scores: [f64::NAN; 2],
                    fallback: false,
                }
            }
        }
    }

    /// Spends one evaluation according to `policy`.
    pub fn step(&mut self, policy: Policy) -> Result<EstimateSnapshot> {
        if self.remaining() == 0 {
            return Err(Error::BudgetExhausted { budget: self.config.budget });
        }
        let t = self.iteration + 1;
        let mut rng = stream_rng(self.config.seed, STREAM_STEP + t as u64);
        let acq = self.propose(policy, &mut rng);
        let m = acq.model;
        let i = m.index();
        let spec = &self.models[i];
        if acq.theta.len() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), found: acq.theta.len() });
        }
        let v = spec.log_likelihood(&acq.theta);
        if !v.is_finite() {
            return Err(Error::NonFiniteLikelihood { theta: acq.theta.clone(), attempts: 1 });
        }
        let old = &self.per_model[i];
        let mut x = old.x.clone();
        x.push_row(&acq.theta)?;
        let mut y = old.y.clone();
        y.push(v);
        let fixed = (!t.is_multiple_of(self.config.refit_every)).then_some((&old.kernel, old.mean_const));
        let updated = fit_model_belief(
            spec,
            &x,
            &y,
            &old.nodes,
            &self.config,
            fit_seed(self.config.seed, t),
            Some(&old.kernel),
            fixed,
        )?;
        self.per_model[i] = updated;
        self.history.push(HistoryEntry { iteration: t, model: m, theta: acq.theta.clone(), log_likelihood: v });
        self.iteration = t;
        let view = self.view();
        self.z_belief = refresh_z_belief(&view, self.config.z_samples, &mut rng)?;
        self.last_acquisition = Some(acq);
        Ok(self.snapshot())
    }

    /// Steps until the budget is spent, returning the initial snapshot followed by one per step.
    pub fn run(&mut self, policy: Policy) -> Result<Vec<EstimateSnapshot>> {
        let mut out = vec![self.snapshot()];
        while self.remaining() > 0 {
            out.push(self.step(policy)?);
        }
        Ok(out)
    }

    /// Estimates for the current state.
    pub fn snapshot(&self) -> EstimateSnapshot {
        let view = self.view();
        let mut flags = Vec::new();
        let acq = self.last_acquisition.as_ref().filter(|_| self.iteration > 0);
        if acq.is_some_and(|a| a.fallback) {
            flags.push("acq-fallback".to_string());
        }
        if self.z_belief.degenerate {
            flags.push("z-degenerate".to_string());
        }
        if view.degenerate().is_some() {
            flags.push("offset-degenerate".to_string());
        }
        if self.per_model.iter().any(|s| s.belief.clamped) {
            flags.push("k-clamped".to_string());
        }
        if self.per_model.iter().any(|s| s.fit_fallback) {
            flags.push("fit-fallback".to_string());
        }
        let lbf = view.log_bayes_factor();
        if lbf.is_nan() {
            flags.push("nonpositive-mean".to_string());
        }
        EstimateSnapshot {
            iteration: self.iteration,
            evaluations: self.history.len(),
            m1: view.mean(ModelIndex::One),
            m2: view.mean(ModelIndex::Two),
            k1: view.var(ModelIndex::One),
            k2: view.var(ModelIndex::Two),
            log_offset: view.reference_offset(),
            z1_plug_in: view.plug_in_z1(),
            z1_mean: self.z_belief.mean(),
            log_bayes_factor: lbf,
            chosen: acq.map(|a| a.model),
            theta: acq.map(|a| a.theta.clone()),
            acquisition_score: acq.map(|a| a.score),
            flags,
        }
    }
}

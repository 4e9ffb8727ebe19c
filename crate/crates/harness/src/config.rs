//! Experiment configuration, loadable from JSON and overridable from the command line.

use serde::{Deserialize, Serialize};

use bqsel::acquisition::OptConfig;
use bqsel::bq::QuadConfig;
use bqsel::gp::{FitConfig, MeanMode};
use bqsel::selection::SelectionConfig;

use crate::error::{HarnessError, Result};

/// Method under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MiZ1,
    MiModelChoice,
    RoundRobinUs,
    Bridge,
    Rjmcmc,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::MiZ1, Method::MiModelChoice, Method::RoundRobinUs, Method::Bridge, Method::Rjmcmc];

    pub fn name(self) -> &'static str {
        match self {
            Method::MiZ1 => "mi-z1",
            Method::MiModelChoice => "mi-model-choice",
            Method::RoundRobinUs => "round-robin-us",
            Method::Bridge => "bridge",
            Method::Rjmcmc => "rjmcmc",
        }
    }

    pub fn is_quadrature(self) -> bool {
        matches!(self, Method::MiZ1 | Method::MiModelChoice | Method::RoundRobinUs)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}

/// Synthetic-task settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Length-scale of the data-generating SE kernel, in every dimension.
    pub true_length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    /// Observations per input dimension.
    pub points_per_dim: usize,
    /// Gaussian prior over each log length-scale.
    pub prior_log_mean: f64,
    pub prior_log_sd: f64,
    /// Prior draws per model for the ground truth.
    pub ground_truth_draws: usize,
    /// Largest accepted ground-truth standard error, relative to `z1`.
    pub ground_truth_rel_se: f64,
    /// Times the draw count may double when the ground truth is too noisy.
    pub ground_truth_doublings: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            true_length_scale: 0.3,
            signal_variance: 1.0,
            noise_variance: 0.01,
            points_per_dim: 5,
            prior_log_mean: 0.3f64.ln(),
            prior_log_sd: 0.5,
            ground_truth_draws: 1_000_000,
            ground_truth_rel_se: 0.01,
            ground_truth_doublings: 3,
        }
    }
}

/// Quadrature-loop settings shared by the three active methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub init_per_dim: usize,
    pub quad: QuadConfig,
    pub opt: OptConfig,
    pub fit: FitConfig,
    pub z_samples: usize,
    pub refit_every: usize,
    pub max_redraws: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl LoopConfig {
    /// Reduced settings that keep a 20-trial sweep at desk scale.
    pub fn desk() -> Self {
        Self {
            init_per_dim: 5,
            quad: QuadConfig { n_nodes: 2_000, k_block: 1_000, low_discrepancy: true, ..QuadConfig::default() },
            opt: OptConfig {
                prior_candidates: 128,
                low_discrepancy_candidates: 32,
                refine_top: 2,
                refine_max_evals: 60,
                ..OptConfig::default()
            },
            fit: FitConfig { restarts: 3, mean: MeanMode::Minimum, ..FitConfig::default() },
            z_samples: 2_000,
            refit_every: 1,
            max_redraws: 10,
        }
    }

    /// Library defaults: 10 000 quadrature nodes, 512 + 64 candidates, 8 fit restarts.
    pub fn full() -> Self {
        let base = SelectionConfig::for_dim(1, 0);
        Self {
            init_per_dim: 5,
            quad: base.quad,
            opt: base.opt,
            fit: base.fit,
            z_samples: base.z_samples,
            refit_every: base.refit_every,
            max_redraws: base.max_redraws,
        }
    }

    pub fn selection_config(&self, d: usize, budget: usize, seed: u64) -> SelectionConfig {
        SelectionConfig {
            init_per_model: self.init_per_dim * d,
            budget,
            quad: self.quad,
            opt: self.opt,
            fit: self.fit.clone(),
            z_samples: self.z_samples,
            refit_every: self.refit_every,
            max_redraws: self.max_redraws,
            seed,
        }
    }
}

/// Settings for the two Monte Carlo baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    /// Estimates are emitted every this many likelihood evaluations.
    pub checkpoint_every: usize,
    /// Fraction of chain iterations discarded as burn-in.
    pub burn_in_fraction: f64,
    /// Initial random-walk step, as a multiple of the prior standard deviation.
    pub initial_step: f64,
    pub jump_prob: f64,
    /// Share of each model's bridge budget spent on the posterior chain (the rest on
    /// proposal draws).
    pub bridge_chain_share: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            checkpoint_every: 5,
            burn_in_fraction: 0.2,
            initial_step: 1.0,
            jump_prob: bqsel_baselines::DEFAULT_JUMP_PROB,
            bridge_chain_share: 0.5,
        }
    }
}

/// Full experiment description; this is what the run manifest records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Total evaluations per trial is `budget_per_dim * d` unless `budget` is set.
    pub budget_per_dim: usize,
    pub budget: Option<usize>,
    pub seed: u64,
    pub task: TaskConfig,
    pub bq: LoopConfig,
    pub mc: McConfig,
    /// Worker threads for the sweep (0 lets the pool decide).
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: vec![1, 2],
            trials: 20,
            methods: vec![Method::MiZ1, Method::RoundRobinUs, Method::Bridge, Method::Rjmcmc],
            budget_per_dim: 50,
            budget: None,
            seed: 0,
            task: TaskConfig::default(),
            bq: LoopConfig::desk(),
            mc: McConfig::default(),
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    /// Settings at the scale of the original experiments (100 trials, dimensions 1 to 5).
    pub fn full_scale() -> Self {
        Self {
            dims: vec![1, 2, 3, 4, 5],
            trials: 100,
            methods: vec![Method::MiZ1, Method::RoundRobinUs, Method::Bridge, Method::Rjmcmc],
            bq: LoopConfig::full(),
            ..Self::default()
        }
    }

    pub fn budget_for(&self, d: usize) -> usize {
        self.budget.unwrap_or(self.budget_per_dim * d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.dims.is_empty() || self.dims.iter().any(|&d| !(1..=5).contains(&d)) {
            return bad(format!("dimensions must lie in 1..=5, got {:?}", self.dims));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.trials == 0 {
            return bad("need at least one trial".into());
        }
        if self.mc.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive".into());
        }
        if !(0.0..1.0).contains(&self.mc.burn_in_fraction) {
            return bad("burn_in_fraction must lie in [0, 1)".into());
        }
        if !(self.mc.bridge_chain_share > 0.0 && self.mc.bridge_chain_share < 1.0) {
            return bad("bridge_chain_share must lie in (0, 1)".into());
        }
        if self.methods.iter().any(|m| m.is_quadrature()) {
            for &d in &self.dims {
                if let Err(e) = self.bq.selection_config(d, self.budget_for(d), 0).validate() {
                    return bad(format!("d={d}: {e}"));
                }
            }
        }
        Ok(())
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::entropy::GaussHermite;
use super::mi::{mi_model_choice_from_profile, mi_z1_from_profile};
use super::z1::PosteriorProbabilityBelief;
use crate::bq::{JointEvidenceView, ModelIndex};
use crate::gp::WarpedSurrogate;
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::prior::ParameterPrior;

/// Candidate-pool plus local-refinement maximizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Random prior draws in the candidate pool, per model.
    pub prior_candidates: usize,
    /// Low-discrepancy points in the candidate pool, per model.
    pub low_discrepancy_candidates: usize,
    /// Number of best pool candidates refined by Nelder–Mead.
    pub refine_top: usize,
    /// Refinement tolerance in normalized prior coordinates.
    pub refine_tol: f64,
    pub refine_max_evals: usize,
    /// Scores at or below this (nats) trigger the uncertainty-sampling fallback.
    pub min_score: f64,
    /// Candidates closer than this to an observation (length-scale units) score zero.
    pub guard_radius: f64,
    pub gauss_hermite_nodes: usize,
    /// Half-width of the refinement box for Gaussian priors, in prior standard deviations.
    pub gaussian_extent: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            prior_candidates: 512,
            low_discrepancy_candidates: 64,
            refine_top: 5,
            refine_tol: 1e-4,
            refine_max_evals: 200,
            min_score: 1e-6,
            guard_radius: 1e-6,
            gauss_hermite_nodes: 32,
            gaussian_extent: 6.0,
        }
    }
}

/// Best point found in one parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub theta: Vec<f64>,
    pub score: f64,
    pub evaluations: usize,
}

/// Outcome of one acquisition step across both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub model: ModelIndex,
    pub theta: Vec<f64>,
    /// Mutual information in nats (prior-weighted log variance when `fallback` is set).
    pub score: f64,
    pub candidates_evaluated: usize,
    /// Best information score found in each model's space (`NaN` if not searched).
    pub model_scores: [f64; 2],
    /// Scores were degenerate and the point came from uncertainty sampling.
    pub fallback: bool,
}

fn within_guard(s: &WarpedSurrogate<f64>, theta: &[f64], radius: f64) -> bool {
    let gp = s.gp();
    gp.obs_locations().rows().any(|r| gp.kernel().scaled_distance(theta, r) < radius)
}

/// Maximizes `score` over one prior's support: scores a candidate pool, then refines the
/// best few with bounded Nelder–Mead in normalized coordinates.
pub fn maximize<R, F>(prior: &ParameterPrior<f64>, cfg: &OptConfig, rng: &mut R, mut score: F) -> Candidate
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    let dim = prior.dim();
    let mut pool = prior.sample_matrix(cfg.prior_candidates, rng);
    let start = rng.random_range(1..1u64 << 20);
    for r in prior.low_discrepancy(cfg.low_discrepancy_candidates, start).rows() {
        pool.push_row(r).expect("matching dimension");
    }
    let mut evaluations = 0usize;
    let mut scored: Vec<(usize, f64)> = pool
        .rows()
        .enumerate()
        .map(|(i, r)| {
            evaluations += 1;
            let v = score(r);
            (i, if v.is_nan() { f64::NEG_INFINITY } else { v })
        })
        .collect();
    if scored.is_empty() {
        let theta = prior.from_normalized(&vec![0.0; dim]);
        let v = score(&theta);
        return Candidate { theta, score: v, evaluations: 1 };
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut best = Candidate { theta: pool.row(scored[0].0).to_vec(), score: scored[0].1, evaluations: 0 };

    let bounds: Vec<(f64, f64)> =
        prior.normalized_bounds().unwrap_or_else(|| vec![(-cfg.gaussian_extent, cfg.gaussian_extent); dim]);
    let steps: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.02 * (hi - lo)).collect();
    let nm = NelderMeadConfig { f_tol: None, x_tol: Some(cfg.refine_tol), max_evals: cfg.refine_max_evals };
    for &(i, _) in scored.iter().take(cfg.refine_top) {
        let u0 = prior.to_normalized(pool.row(i));
        let m = nelder_mead(|u| -score(&prior.from_normalized(u)), &u0, &steps, Some(&bounds), nm);
        evaluations += m.evals;
        if -m.value > best.score {
            best = Candidate { theta: prior.from_normalized(&m.x), score: -m.value, evaluations: 0 };
        }
    }
    best.evaluations = evaluations;
    best
}

/// Maximizes `Sigma(theta, theta) pi(theta)^2` (on the log scale).
pub fn uncertainty_sampling<R: Rng + ?Sized>(
    surrogate: &WarpedSurrogate<f64>,
    prior: &ParameterPrior<f64>,
    cfg: &OptConfig,
    rng: &mut R,
) -> Candidate {
    maximize(prior, cfg, rng, |t| uncertainty_score(surrogate, prior, t))
}

/// `log Sigma(theta, theta) + 2 log pi(theta)`
pub fn uncertainty_score(surrogate: &WarpedSurrogate<f64>, prior: &ParameterPrior<f64>, theta: &[f64]) -> f64 {
    let v = surrogate.moment_matched_var(theta);
    if v > 0.0 {
        v.ln() + 2.0 * prior.log_density(theta)
    } else {
        f64::NEG_INFINITY
    }
}

fn fallback<R: Rng + ?Sized>(
    view: &JointEvidenceView<f64>,
    priors: [&ParameterPrior<f64>; 2],
    cfg: &OptConfig,
    rng: &mut R,
    model_scores: [f64; 2],
    evaluated: usize,
) -> AcquisitionResult {
    let model = view.degenerate().unwrap_or_else(|| view.leading());
    let c = uncertainty_sampling(view.belief(model).surrogate(), priors[model.index()], cfg, rng);
    AcquisitionResult {
        model,
        theta: c.theta,
        score: c.score,
        candidates_evaluated: evaluated + c.evaluations,
        model_scores,
        fallback: true,
    }
}

/// Larger score wins; scores within a relative `1e-12` tie and go to the model with fewer
/// observations, then model 1.
pub fn choose_model(scores: [f64; 2], n_obs: [usize; 2]) -> ModelIndex {
    let [a, b] = scores;
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
        if n_obs[1] < n_obs[0] {
            ModelIndex::Two
        } else {
            ModelIndex::One
        }
    } else if b > a {
        ModelIndex::Two
    } else {
        ModelIndex::One
    }
}

fn select_by<R, F>(
    view: &JointEvidenceView<f64>,
    priors: [&ParameterPrior<f64>; 2],
    cfg: &OptConfig,
    rng: &mut R,
    skip: bool,
    mut score: F,
) -> AcquisitionResult
where
    R: Rng + ?Sized,
    F: FnMut(ModelIndex, &[f64]) -> f64,
{
    if skip || view.degenerate().is_some() {
        return fallback(view, priors, cfg, rng, [f64::NAN; 2], 0);
    }
    let best = ModelIndex::BOTH.map(|m| {
        let s = view.belief(m).surrogate();
        maximize(priors[m.index()], cfg, rng, |t| if within_guard(s, t, cfg.guard_radius) { 0.0 } else { score(m, t) })
    });
    let evaluated = best[0].evaluations + best[1].evaluations;
    let model_scores = [best[0].score, best[1].score];
    if !(model_scores[0].max(model_scores[1]) > cfg.min_score) {
        return fallback(view, priors, cfg, rng, model_scores, evaluated);
    }
    let n_obs = [view.belief(ModelIndex::One).n_obs(), view.belief(ModelIndex::Two).n_obs()];
    let model = choose_model(model_scores, n_obs);
    let c = best[model.index()].clone();
    AcquisitionResult {
        model,
        theta: c.theta,
        score: c.score,
        candidates_evaluated: evaluated,
        model_scores,
        fallback: false,
    }
}

/// Picks the model and location maximizing the mutual information with `z_1`.
pub fn select_next<R: Rng + ?Sized>(
    view: &JointEvidenceView<f64>,
    priors: [&ParameterPrior<f64>; 2],
    z_belief: &PosteriorProbabilityBelief<f64>,
    cfg: &OptConfig,
    rng: &mut R,
) -> AcquisitionResult {
    select_by(view, priors, cfg, rng, z_belief.degenerate, |m, t| {
        mi_z1_from_profile(view, &view.profile(m, t), m, z_belief)
    })
}

/// Picks the model and location maximizing the mutual information with `[z_1 > z_2]`.
pub fn select_next_model_choice<R: Rng + ?Sized>(
    view: &JointEvidenceView<f64>,
    priors: [&ParameterPrior<f64>; 2],
    cfg: &OptConfig,
    rng: &mut R,
) -> AcquisitionResult {
    let rule = GaussHermite::new(cfg.gauss_hermite_nodes);
    select_by(view, priors, cfg, rng, false, |m, t| mi_model_choice_from_profile(view, &view.profile(m, t), m, &rule))
}

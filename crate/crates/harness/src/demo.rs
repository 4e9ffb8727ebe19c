//! Wide evidence beliefs can still pin down the posterior probability.

use serde::{Deserialize, Serialize};

use bqsel::acquisition::sample_z1_moments;
use bqsel::selection::stream_rng;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub m1: f64,
    pub k1: f64,
    pub m2: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoResult {
    pub scenario: Scenario,
    pub samples: usize,
    pub threshold: f64,
    pub fraction_above: f64,
    pub z1_mean: f64,
    pub rejection_rate: f64,
    /// Relative standard deviation of each evidence belief.
    pub evidence_cv: [f64; 2],
}

/// Evidence beliefs `N(10, 4)` and `N(2, 4)` (variances).
pub const MOTIVATION: Scenario = Scenario { m1: 10.0, k1: 4.0, m2: 2.0, k2: 4.0 };

/// Samples the `z1` belief implied by `scenario` and reports how much of it lies above
/// `threshold`.
pub fn run_demo(scenario: Scenario, samples: usize, threshold: f64, seed: u64) -> Result<DemoResult> {
    let mut rng = stream_rng(seed, 7);
    let b = sample_z1_moments(scenario.m1, scenario.k1, scenario.m2, scenario.k2, samples, &mut rng)?;
    Ok(DemoResult {
        scenario,
        samples,
        threshold,
        fraction_above: b.fraction_above(threshold),
        z1_mean: b.mean(),
        rejection_rate: b.rejection_rate(),
        evidence_cv: [scenario.k1.sqrt() / scenario.m1, scenario.k2.sqrt() / scenario.m2],
    })
}

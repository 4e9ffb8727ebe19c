//! Paired one-sided t-test and robust summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_difference: f64,
    pub sd_difference: f64,
    pub t: f64,
    /// One-sided p-value for the alternative `mean(a - b) < 0`.
    pub p: f64,
    /// The differences have zero variance; `t` and `p` follow the sign of the mean.
    pub degenerate: bool,
}

/// One-sided paired t-test of `a < b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(HarnessError::Config(format!(
            "paired t-test needs two equal-length samples of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(HarnessError::Config("paired t-test needs finite values".into()));
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE) || var == 0.0 {
        let (t, p) = if mean < 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else if mean > 0.0 {
            (f64::INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        };
        return Ok(PairedTTest { n, mean_difference: mean, sd_difference: sd, t, p, degenerate: true });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2 gives positive degrees of freedom");
    Ok(PairedTTest { n, mean_difference: mean, sd_difference: sd, t, p: dist.cdf(t), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Median and quartiles; NaN entries count as `+inf` (a missing estimate is the worst case).
pub fn summarize(values: &[f64]) -> Summary {
    let v: Vec<f64> = values.iter().map(|&x| if x.is_nan() { f64::INFINITY } else { x }).collect();
    if v.is_empty() {
        return Summary { n: 0, median: f64::NAN, q1: f64::NAN, q3: f64::NAN };
    }
    let mut data = Data::new(v);
    Summary { n: values.len(), median: data.median(), q1: data.lower_quartile(), q3: data.upper_quartile() }
}

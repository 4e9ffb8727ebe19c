//! Aggregation of sweep results into per-method error tables and paired tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::stats::{paired_t_test, summarize, PairedTTest, Summary};
use crate::trial::TraceRow;

/// Final-row statistics of one method at one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub d: usize,
    pub method: Method,
    pub trials: usize,
    pub frac_err: Summary,
    pub abs_err_logbf: Summary,
    /// Fraction of trials whose final estimate picks the ground-truth favourite.
    pub correct_fraction: f64,
    /// Fraction of trials in which any step used the acquisition fallback.
    pub fallback_fraction: f64,
    pub failed_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub d: usize,
    /// The test is `a < b` on final fractional error, paired by trial.
    pub a: Method,
    pub b: Method,
    /// Trials dropped because either final error was missing or infinite.
    pub dropped: usize,
    pub test: Option<PairedTTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
}

/// Per-trial view of one `(d, method)` block.
#[derive(Debug, Clone)]
pub struct TrialTrace<'a> {
    pub trial: usize,
    pub rows: Vec<&'a TraceRow>,
}

impl TrialTrace<'_> {
    /// Row with the most evaluations (the last one on ties).
    pub fn last(&self) -> &TraceRow {
        self.rows.iter().copied().max_by_key(|r| r.evals).expect("blocks are non-empty")
    }

    pub fn used_fallback(&self) -> bool {
        self.rows.iter().any(|r| r.has_flag("acq-fallback"))
    }

    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.is_failure())
    }
}

/// Groups rows by `(d, method)`, then by trial.
pub fn group(rows: &[TraceRow]) -> BTreeMap<(usize, Method), Vec<TrialTrace<'_>>> {
    let mut by: BTreeMap<(usize, Method), BTreeMap<usize, Vec<&TraceRow>>> = BTreeMap::new();
    for r in rows {
        by.entry((r.d, r.method)).or_default().entry(r.trial).or_default().push(r);
    }
    by.into_iter()
        .map(|(k, trials)| (k, trials.into_iter().map(|(trial, rows)| TrialTrace { trial, rows }).collect()))
        .collect()
}

pub fn summarize_method(d: usize, method: Method, trials: &[TrialTrace<'_>]) -> MethodSummary {
    let finals: Vec<&TraceRow> = trials.iter().map(|t| t.last()).collect();
    let n = trials.len().max(1) as f64;
    MethodSummary {
        d,
        method,
        trials: trials.len(),
        frac_err: summarize(&finals.iter().map(|r| r.frac_err).collect::<Vec<_>>()),
        abs_err_logbf: summarize(&finals.iter().map(|r| r.abs_err_logbf).collect::<Vec<_>>()),
        correct_fraction: finals.iter().filter(|r| r.correct_choice == Some(true)).count() as f64 / n,
        fallback_fraction: trials.iter().filter(|t| t.used_fallback()).count() as f64 / n,
        failed_trials: trials.iter().filter(|t| t.failed()).count(),
    }
}

/// Paired one-sided test of `a < b` on final fractional error at dimension `d`.
pub fn compare(d: usize, a: (Method, &[TrialTrace<'_>]), b: (Method, &[TrialTrace<'_>])) -> Comparison {
    let fb: BTreeMap<usize, f64> = b.1.iter().map(|t| (t.trial, t.last().frac_err)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for t in a.1 {
        match fb.get(&t.trial) {
            Some(&y) if y.is_finite() && t.last().frac_err.is_finite() => {
                xs.push(t.last().frac_err);
                ys.push(y);
            }
            _ => dropped += 1,
        }
    }
    Comparison { d, a: a.0, b: b.0, dropped, test: paired_t_test(&xs, &ys).ok() }
}

/// Summaries for every `(d, method)` and tests of `mi-z1` against every other method.
pub fn build_report(rows: &[TraceRow]) -> Report {
    let groups = group(rows);
    let methods = groups.iter().map(|(&(d, m), trials)| summarize_method(d, m, trials)).collect();
    let mut comparisons = Vec::new();
    for (&(d, m), trials) in &groups {
        if m == Method::MiZ1 {
            continue;
        }
        if let Some(ours) = groups.get(&(d, Method::MiZ1)) {
            comparisons.push(compare(d, (Method::MiZ1, ours), (m, trials)));
        }
    }
    Report { methods, comparisons }
}

impl Report {
    pub fn method(&self, d: usize, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.d == d && s.method == m)
    }

    pub fn comparison(&self, d: usize, a: Method, b: Method) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.d == d && c.a == a && c.b == b)
    }

    /// Plain-text tables.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "final fractional error of z1 and absolute error of the log Bayes factor");
        let _ = writeln!(
            s,
            "{:>2}  {:<16} {:>6}  {:>10} {:>10} {:>10}  {:>10} {:>10}  {:>7} {:>8} {:>6}",
            "d",
            "method",
            "trials",
            "frac med",
            "frac q1",
            "frac q3",
            "logbf med",
            "logbf q3",
            "correct",
            "fallback",
            "failed"
        );
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{:>2}  {:<16} {:>6}  {:>10.4e} {:>10.4e} {:>10.4e}  {:>10.4e} {:>10.4e}  {:>7.2} {:>8.2} {:>6}",
                m.d,
                m.method.name(),
                m.trials,
                m.frac_err.median,
                m.frac_err.q1,
                m.frac_err.q3,
                m.abs_err_logbf.median,
                m.abs_err_logbf.q3,
                m.correct_fraction,
                m.fallback_fraction,
                m.failed_trials
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "one-sided paired t-tests on final fractional error (a < b)");
        for c in &self.comparisons {
            match &c.test {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "d={} {} < {}: n={} t={:.4} p={:.4e}{}{}",
                        c.d,
                        c.a.name(),
                        c.b.name(),
                        t.n,
                        t.t,
                        t.p,
                        if t.degenerate { " (zero-variance differences)" } else { "" },
                        if c.dropped > 0 { format!(" ({} trials dropped)", c.dropped) } else { String::new() }
                    );
                }
                None => {
                    let _ = writeln!(s, "d={} {} < {}: not enough paired finite results", c.d, c.a.name(), c.b.name());
                }
            }
        }
        s
    }
}

use std::fs;
use std::process::Command;

use bqsel::gp::{Kernel, KernelFamily};
use bqsel::linalg::Matrix;
use bqsel_harness::config::{ExperimentConfig, LoopConfig, Method, TaskConfig};
use bqsel_harness::demo::{run_demo, Scenario};
use bqsel_harness::seeds::{derive, trial_seed};
use bqsel_harness::stats::{paired_t_test, summarize};
use bqsel_harness::sweep::{build_manifest, done_path, read_rows, replay_trial, rows_to_csv, sweep, Manifest};
use bqsel_harness::task::{gp_log_marginal_likelihood, SyntheticTask};
use bqsel_harness::trial::{checkpoints, run_trial, TrialKey, FLAG_INITIALIZING};
use bqsel_harness::HarnessError;

/// A configuration small enough for debug-speed tests.
fn cheap(methods: Vec<Method>, trials: usize) -> ExperimentConfig {
    let mut bq = LoopConfig::desk();
    bq.quad.n_nodes = 256;
    bq.quad.k_block = 256;
    bq.opt.prior_candidates = 24;
    bq.opt.low_discrepancy_candidates = 8;
    bq.opt.refine_top = 1;
    bq.opt.refine_max_evals = 20;
    bq.fit.restarts = 1;
    bq.z_samples = 1_000;
    ExperimentConfig {
        dims: vec![1],
        trials,
        methods,
        task: TaskConfig { ground_truth_draws: 4_000, ground_truth_doublings: 0, ..TaskConfig::default() },
        bq,
        threads: 1,
        ..ExperimentConfig::default()
    }
}

fn task(seed: u64, cfg: &ExperimentConfig) -> SyntheticTask {
    SyntheticTask::generate_with_truth(1, seed, &cfg.task).unwrap()
}

// ---------- statistics ----------

/// Student-t CDF with four degrees of freedom in closed form.
fn student_t4_cdf(t: f64) -> f64 {
    let u = 4.0 + t * t;
    0.5 + 0.75 * t / u.sqrt() * (1.0 - t * t / (3.0 * u))
}

#[test]
fn t_test_on_a_known_difference() {
    let b = [10.0, 20.0, 30.0, 40.0, 50.0];
    let a: Vec<f64> = b.iter().zip(1..=5).map(|(x, k)| x - k as f64).collect();
    let r = paired_t_test(&a, &b).unwrap();
    assert_eq!(r.n, 5);
    assert!((r.mean_difference + 3.0).abs() < 1e-12);
    assert!((r.sd_difference - 2.5f64.sqrt()).abs() < 1e-12);
    assert!((r.t + 18f64.sqrt()).abs() < 1e-12, "t = {}", r.t);
    assert!((r.p - student_t4_cdf(r.t)).abs() < 1e-10, "p = {} vs {}", r.p, student_t4_cdf(r.t));
    assert!(!r.degenerate);
    let flipped = paired_t_test(&b, &a).unwrap();
    assert!((flipped.p + r.p - 1.0).abs() < 1e-12);
}

#[test]
fn t_test_degenerate_cases() {
    let a = [1.0, 2.0, 3.0];
    let same = paired_t_test(&a, &a).unwrap();
    assert!(same.degenerate && same.t == 0.0 && same.p == 0.5);
    let shifted: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
    let below = paired_t_test(&a, &shifted).unwrap();
    assert!(below.degenerate && below.p == 0.0);
    let above = paired_t_test(&shifted, &a).unwrap();
    assert!(above.degenerate && above.p == 1.0);
    assert!(paired_t_test(&[1.0], &[2.0]).is_err());
    assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());
    assert!(paired_t_test(&[1.0, f64::NAN], &[2.0, 3.0]).is_err());
}

#[test]
fn summaries_treat_missing_estimates_as_worst() {
    let s = summarize(&[3.0, 1.0, f64::NAN, 2.0, 5.0]);
    assert_eq!(s.n, 5);
    assert_eq!(s.median, 3.0);
    assert!(summarize(&[f64::NAN, f64::NAN, 1.0]).median.is_infinite());
    assert!(summarize(&[]).median.is_nan());
}

#[test]
fn seeds_are_distinct_and_stable() {
    let mut seen = std::collections::HashSet::new();
    for d in 1..=5 {
        for t in 0..100 {
            assert!(seen.insert(trial_seed(0, d, t)));
        }
    }
    assert_eq!(trial_seed(7, 2, 3), trial_seed(7, 2, 3));
    assert_ne!(trial_seed(7, 2, 3), trial_seed(8, 2, 3));
    assert_ne!(derive(1, 2), derive(2, 1));
}

// ---------- tasks ----------

/// `log N(y; 0, K)` by Gauss-Jordan elimination: determinant from the pivots, quadratic form
/// from the explicit inverse.
fn dense_log_normal(k: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let mut a: Vec<Vec<f64>> = k.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let piv = a[c][c];
        log_det += piv.abs().ln();
        for j in 0..n {
            a[c][j] /= piv;
            inv[c][j] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    let quad: f64 = (0..n).map(|i| (0..n).map(|j| y[i] * inv[i][j] * y[j]).sum::<f64>()).sum();
    -0.5 * (quad + log_det + n as f64 * (2.0 * std::f64::consts::PI).ln())
}

fn se_gram(x: &[Vec<f64>], ell: f64, sv: f64, noise: f64) -> Vec<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, a)| {
            x.iter()
                .enumerate()
                .map(|(j, b)| {
                    let r2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
                    sv * (-0.5 * r2 / (ell * ell)).exp() + if i == j { noise } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

#[test]
fn task_generation_is_deterministic() {
    let cfg = TaskConfig::default();
    for d in 1..=3 {
        let a = SyntheticTask::generate(d, 42, &cfg).unwrap();
        let b = SyntheticTask::generate(d, 42, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data_locations.len(), 5 * d);
        assert_eq!(a.data_values.len(), 5 * d);
        assert!(a.data_locations.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        assert_ne!(a.data_values, SyntheticTask::generate(d, 43, &cfg).unwrap().data_values);
    }
    assert!(SyntheticTask::generate(0, 1, &cfg).is_err());
    assert!(SyntheticTask::generate(6, 1, &cfg).is_err());
}

#[test]
fn marginal_likelihood_matches_dense_oracle_and_prefers_the_true_scale() {
    let cfg = TaskConfig::default();
    let (mut at_true, mut at_wide) = (0.0, 0.0);
    for seed in 0..20 {
        let t = SyntheticTask::generate(2, seed, &cfg).unwrap();
        let x = Matrix::from_rows(&t.data_locations, 2).unwrap();
        for ell in [cfg.true_length_scale, 10.0 * cfg.true_length_scale] {
            let k = Kernel::isotropic(KernelFamily::SquaredExponential, cfg.signal_variance, ell, 2).unwrap();
            let ours = gp_log_marginal_likelihood(&k, &x, &t.data_values, cfg.noise_variance);
            let oracle = dense_log_normal(
                &se_gram(&t.data_locations, ell, cfg.signal_variance, cfg.noise_variance),
                &t.data_values,
            );
            assert!((ours - oracle).abs() < 1e-8 * oracle.abs().max(1.0), "{ours} vs {oracle}");
            if ell == cfg.true_length_scale {
                at_true += ours;
            } else {
                at_wide += ours;
            }
        }
    }
    assert!(at_true > at_wide, "{at_true} vs {at_wide}");
}

#[test]
fn ground_truth_is_consistent() {
    let cfg = cheap(vec![Method::RoundRobinUs], 1);
    let t = task(5, &cfg);
    let g = t.truth().unwrap();
    assert!(g.z1 > 0.0 && g.z1 < 1.0);
    assert!(g.z1_se > 0.0 && g.z1_se < 0.5);
    assert!((g.log_bayes_factor - (g.log_evidence[0] - g.log_evidence[1])).abs() < 1e-12);
    assert!((g.z1 - 1.0 / (1.0 + (-g.log_bayes_factor).exp())).abs() < 1e-12);
    assert_eq!(g.draws, 4_000);
    assert!(SyntheticTask::generate(1, 5, &cfg.task).unwrap().truth().is_err());
}

// ---------- trials ----------

#[test]
fn round_robin_spends_exactly_the_budget() {
    let cfg = cheap(vec![Method::RoundRobinUs], 1);
    let t = task(11, &cfg);
    let key = TrialKey { d: 1, trial: 0, method: Method::RoundRobinUs };
    let out = run_trial(&t, key, 50, 11, &cfg).unwrap();
    assert!(!out.failed);
    assert_eq!(out.evaluations, 50);
    assert_eq!(out.rows.len(), 50);
    let evals: Vec<usize> = out.rows.iter().map(|r| r.evals).collect();
    assert_eq!(evals, (1..=50).collect::<Vec<_>>());
    for r in &out.rows[..9] {
        assert!(r.has_flag(FLAG_INITIALIZING) && r.z1_hat.is_nan() && r.correct_choice.is_none());
    }
    for r in &out.rows[9..] {
        assert!(r.z1_hat.is_finite() && (0.0..=1.0).contains(&r.z1_hat));
        assert!((r.frac_err - (r.z1_hat - r.z1_true).abs() / r.z1_true).abs() < 1e-12);
    }
}

#[test]
fn budget_equal_to_initialization_yields_only_initial_rows() {
    let cfg = cheap(vec![Method::MiZ1], 1);
    let t = task(12, &cfg);
    let key = TrialKey { d: 1, trial: 0, method: Method::MiZ1 };
    let out = run_trial(&t, key, 10, 12, &cfg).unwrap();
    assert_eq!(out.evaluations, 10);
    assert_eq!(out.rows.len(), 10);
    assert!(out.rows.iter().all(|r| r.iteration == 0));
    assert!(out.rows[9].z1_hat.is_finite());
}

#[test]
fn monte_carlo_methods_report_at_checkpoints() {
    assert_eq!(checkpoints(12, 5), vec![5, 10, 12]);
    assert_eq!(checkpoints(10, 5), vec![5, 10]);
    assert!(checkpoints(0, 5).is_empty());
    let cfg = cheap(vec![Method::Bridge, Method::Rjmcmc], 1);
    let t = task(13, &cfg);
    for method in [Method::Bridge, Method::Rjmcmc] {
        let out = run_trial(&t, TrialKey { d: 1, trial: 0, method }, 50, 13, &cfg).unwrap();
        assert!(!out.failed, "{method}");
        let evals: Vec<usize> = out.rows.iter().map(|r| r.evals).collect();
        assert_eq!(evals, checkpoints(50, 5), "{method}");
        let last = out.rows.last().unwrap();
        assert!(last.z1_hat.is_finite() || last.has_flag("no-estimate"), "{method}: {last:?}");
    }
}

#[test]
fn trials_are_reproducible() {
    let cfg = cheap(vec![Method::MiZ1], 1);
    let t = task(14, &cfg);
    let key = TrialKey { d: 1, trial: 0, method: Method::MiZ1 };
    let a = run_trial(&t, key, 14, 14, &cfg).unwrap();
    let b = run_trial(&t, key, 14, 14, &cfg).unwrap();
    assert_eq!(rows_to_csv(&a.rows).unwrap(), rows_to_csv(&b.rows).unwrap());
}

// ---------- configuration ----------

#[test]
fn configuration_validation_and_parsing() {
    assert!(ExperimentConfig::default().validate().is_ok());
    assert!(ExperimentConfig::full_scale().validate().is_ok());
    assert_eq!(ExperimentConfig::default().budget_for(2), 100);
    let too_small = ExperimentConfig { budget: Some(9), dims: vec![1], ..ExperimentConfig::default() };
    assert!(matches!(too_small.validate(), Err(HarnessError::Config(_))));
    let mc_only = ExperimentConfig { methods: vec![Method::Rjmcmc], ..too_small };
    assert!(mc_only.validate().is_ok());
    assert!(ExperimentConfig { dims: vec![6], ..ExperimentConfig::default() }.validate().is_err());
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert!("simulated-annealing".parse::<Method>().is_err());
    let json = serde_json::to_string(&ExperimentConfig::default()).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), ExperimentConfig::default());
    let partial: ExperimentConfig = serde_json::from_str(r#"{"trials": 3}"#).unwrap();
    assert_eq!(partial.trials, 3);
    assert_eq!(partial.bq, LoopConfig::desk());
}

// ---------- sweeps ----------

#[test]
fn sweep_writes_every_row_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = ExperimentConfig { trials: 3, ..cheap(vec![Method::RoundRobinUs, Method::Rjmcmc], 3) };
    let s = sweep(&cfg, &out, false).unwrap();
    assert_eq!(s.trials_run, 6);
    assert_eq!(s.trials_skipped, 0);
    assert_eq!(s.rows_written, 3 * (50 + 10));
    let rows = read_rows(&out).unwrap();
    assert_eq!(rows.len(), s.rows_written);
    let order: Vec<(usize, Method)> = rows.iter().map(|r| (r.trial, r.method)).collect();
    let mut sorted = order.clone();
    sorted.sort_by_key(|&(t, m)| (t, cfg.methods.iter().position(|&x| x == m)));
    assert_eq!(order, sorted);
    assert_eq!(fs::read_to_string(done_path(&out)).unwrap().lines().count(), 6);
}

#[test]
fn resume_skips_completed_trials_and_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let cfg = cheap(vec![Method::Rjmcmc, Method::Bridge], 3);
    sweep(&cfg, &out, false).unwrap();
    let full = fs::read(&out).unwrap();

    // Simulate an interruption after two trials, with a partial third trial on disk.
    let done = fs::read_to_string(done_path(&out)).unwrap();
    let first_two: String = done.lines().take(2).map(|l| format!("{l}\n")).collect();
    fs::write(done_path(&out), first_two).unwrap();
    let text = String::from_utf8(full.clone()).unwrap();
    let partial: String = text.lines().take(1 + 10 + 10 + 3).map(|l| format!("{l}\n")).collect();
    fs::write(&out, partial).unwrap();

    let s = sweep(&cfg, &out, true).unwrap();
    assert_eq!(s.trials_skipped, 2);
    assert_eq!(s.trials_run, 4);
    assert_eq!(fs::read(&out).unwrap(), full);

    let other = ExperimentConfig { seed: 99, ..cfg };
    assert!(matches!(sweep(&other, &out, true), Err(HarnessError::ManifestMismatch(_))));
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let cfg = cheap(vec![Method::MiZ1, Method::Rjmcmc], 2);
    let cfg = ExperimentConfig { budget: Some(16), ..cfg };
    sweep(&cfg, &out, false).unwrap();
    let manifest = Manifest::load(&bqsel_harness::sweep::manifest_path(&out)).unwrap();
    assert_eq!(manifest, build_manifest(&cfg).unwrap());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let rows = read_rows(&out).unwrap();
    for key in manifest.keys() {
        let replay = rows_to_csv(&replay_trial(&manifest, key).unwrap().rows).unwrap();
        let mut expected = format!("{}\n", lines[0]);
        for (i, r) in rows.iter().enumerate() {
            if (r.d, r.trial, r.method) == (key.d, key.trial, key.method) {
                expected.push_str(lines[i + 1]);
                expected.push('\n');
            }
        }
        assert_eq!(String::from_utf8(replay).unwrap(), expected, "{key:?}");
    }
}

// ---------- demo and command line ----------

#[test]
fn well_separated_beliefs_give_confident_z1() {
    let s = Scenario { m1: 100.0, k1: 1.0, m2: 1.0, k2: 0.01 };
    let r = run_demo(s, 5_000, 0.9, 3).unwrap();
    assert_eq!(r.fraction_above, 1.0);
    assert_eq!(r, run_demo(s, 5_000, 0.9, 3).unwrap());
    let even = run_demo(Scenario { m1: 5.0, k1: 1.0, m2: 5.0, k2: 1.0 }, 20_000, 0.5, 3).unwrap();
    assert!((even.fraction_above - 0.5).abs() < 0.02 && (even.z1_mean - 0.5).abs() < 0.01);
}

#[test]
fn command_line_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bqsel");
    let ok = Command::new(bin).args(["demo-motivation"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("0.9"));
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(Command::new(bin).arg("no-such-command").output().unwrap().status.code(), Some(1));
    let bad = Command::new(bin).args(["sweep", "--out", "/nonexistent/x.csv", "--d", "9"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bqsel_harness::config::{ExperimentConfig, Method};
use bqsel_harness::demo::{run_demo, MOTIVATION};
use bqsel_harness::report::build_report;
use bqsel_harness::seeds::trial_seed;
use bqsel_harness::sweep::{read_rows, replay_trial, rows_to_csv, sweep, Manifest, ManifestTrial, MANIFEST_VERSION};
use bqsel_harness::task::SyntheticTask;
use bqsel_harness::trial::TrialKey;
use bqsel_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "bqsel", version, about = "Active Bayesian-quadrature model selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the full-scale settings instead of the desk profile.
    #[arg(long)]
    full_scale: bool,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    /// Total likelihood evaluations per trial (default 50 per dimension).
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated methods: mi-z1, mi-model-choice, round-robin-us, bridge, rjmcmc.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_reader(BufReader::new(File::open(p)?))?,
            None if self.full_scale => ExperimentConfig::full_scale(),
            None => ExperimentConfig::default(),
        };
        if !self.d.is_empty() {
            cfg.dims = self.d.clone();
        }
        if self.budget.is_some() {
            cfg.budget = self.budget;
        }
        if !self.methods.is_empty() {
            cfg.methods = self.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic task (with ground truth) and write it as JSON.
    GenTask {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Skip the ground-truth computation.
        #[arg(long)]
        no_truth: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one trial of one method and write its CSV trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Replay from a sweep manifest instead of the flags.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (dimension, trial, method) combination.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Keep completed trials of an interrupted sweep.
        #[arg(long)]
        resume: bool,
    },
    /// Simple Monte Carlo ground truth for a task file.
    GroundTruth {
        #[arg(long)]
        task: PathBuf,
        /// Prior draws per model (default: the task's configured count).
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a results CSV into error tables and paired t-tests.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Wide but well-separated evidence beliefs and the resulting z1 belief.
    DemoMotivation {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => File::create(p)?.write_all(bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

/// Returns whether anything failed partially.
fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::GenTask { common, trial, no_truth, out } => {
            let cfg = common.resolve()?;
            let d = cfg.dims[0];
            let seed = trial_seed(cfg.seed, d, trial);
            let task = if no_truth {
                SyntheticTask::generate(d, seed, &cfg.task)?
            } else {
                SyntheticTask::generate_with_truth(d, seed, &cfg.task)?
            };
            output(out.as_deref(), &json_bytes(&task)?)?;
            Ok(false)
        }
        Command::Run { common, trial, manifest, out } => {
            let cfg = common.resolve()?;
            let d = cfg.dims[0];
            let method: Method = cfg.methods[0];
            let manifest = match manifest {
                Some(p) => Manifest::load(&p)?,
                None => {
                    let seed = trial_seed(cfg.seed, d, trial);
                    let task = SyntheticTask::generate_with_truth(d, seed, &cfg.task)?;
                    let mt = ManifestTrial { d, trial, seed, truth: task.truth()? };
                    Manifest {
                        version: MANIFEST_VERSION,
                        config: ExperimentConfig { dims: vec![d], trials: trial + 1, ..cfg },
                        trials: vec![mt],
                    }
                }
            };
            let outcome = replay_trial(&manifest, TrialKey { d, trial, method })?;
            output(out.as_deref(), &rows_to_csv(&outcome.rows)?)?;
            Ok(outcome.failed)
        }
        Command::Sweep { common, out, resume } => {
            let cfg = common.resolve()?;
            let s = sweep(&cfg, &out, resume)?;
            eprintln!(
                "{} trials run, {} resumed, {} rows in {}, {} failed",
                s.trials_run,
                s.trials_skipped,
                s.rows_written,
                out.display(),
                s.failed_trials
            );
            Ok(s.failed_trials > 0)
        }
        Command::GroundTruth { task, draws, out } => {
            let t: SyntheticTask = serde_json::from_reader(BufReader::new(File::open(&task)?))?;
            let g = t.compute_ground_truth(draws.unwrap_or(t.config.ground_truth_draws))?;
            output(out.as_deref(), &json_bytes(&g)?)?;
            Ok(false)
        }
        Command::Report { input, json } => {
            let rows = read_rows(&input)?;
            if rows.is_empty() {
                return Err(HarnessError::Config(format!("{} has no rows", input.display())));
            }
            let report = build_report(&rows);
            print!("{}", report.render());
            if let Some(p) = json {
                output(Some(&p), &json_bytes(&report)?)?;
            }
            Ok(report.methods.iter().any(|m| m.failed_trials > 0))
        }
        Command::DemoMotivation { samples, threshold, seed } => {
            let r = run_demo(MOTIVATION, samples, threshold, seed)?;
            output(None, &json_bytes(&r)?)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

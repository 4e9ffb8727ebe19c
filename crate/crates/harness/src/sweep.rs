//! Full experiment sweeps: task generation, ordered CSV output, manifests and resumption.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::seeds::trial_seed;
use crate::task::{GroundTruth, SyntheticTask};
use crate::trial::{run_trial, TraceRow, TrialKey, TrialOutcome};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub d: usize,
    pub trial: usize,
    pub seed: u64,
    pub truth: GroundTruth,
}

/// Everything needed to regenerate a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: ExperimentConfig,
    pub trials: Vec<ManifestTrial>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if m.version != MANIFEST_VERSION {
            return Err(HarnessError::Config(format!("manifest version {} is not supported", m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn trial(&self, d: usize, trial: usize) -> Result<&ManifestTrial> {
        self.trials
            .iter()
            .find(|t| t.d == d && t.trial == trial)
            .ok_or_else(|| HarnessError::Config(format!("manifest has no trial {trial} at d={d}")))
    }

    /// Regenerates the task of `(d, trial)` with its stored ground truth.
    pub fn task(&self, d: usize, trial: usize) -> Result<SyntheticTask> {
        let t = self.trial(d, trial)?;
        let mut task = SyntheticTask::generate(d, t.seed, &self.config.task)?;
        task.truth = Some(t.truth);
        Ok(task)
    }

    /// Sweep order: dimension, then trial, then method in configuration order.
    pub fn keys(&self) -> Vec<TrialKey> {
        let mut keys = Vec::new();
        for &d in &self.config.dims {
            for trial in 0..self.config.trials {
                for &method in &self.config.methods {
                    keys.push(TrialKey { d, trial, method });
                }
            }
        }
        keys
    }
}

/// Generates every task of `config` and its ground truth.
pub fn build_manifest(config: &ExperimentConfig) -> Result<Manifest> {
    config.validate()?;
    let pairs: Vec<(usize, usize)> =
        config.dims.iter().flat_map(|&d| (0..config.trials).map(move |t| (d, t))).collect();
    let trials = pairs
        .par_iter()
        .map(|&(d, trial)| {
            let seed = trial_seed(config.seed, d, trial);
            let task = SyntheticTask::generate_with_truth(d, seed, &config.task)?;
            log::info!("task d={d} trial={trial}: z1 = {:.4}", task.truth()?.z1);
            Ok(ManifestTrial { d, trial, seed, truth: task.truth()? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Manifest { version: MANIFEST_VERSION, config: config.clone(), trials })
}

/// Replays one `(d, trial, method)` entry of a manifest.
pub fn replay_trial(manifest: &Manifest, key: TrialKey) -> Result<TrialOutcome> {
    let task = manifest.task(key.d, key.trial)?;
    let seed = manifest.trial(key.d, key.trial)?.seed;
    run_trial(&task, key, manifest.config.budget_for(key.d), seed, &manifest.config)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sidecar(out, "manifest.json")
}

/// Completed keys, one per line, in sweep order.
pub fn done_path(out: &Path) -> PathBuf {
    sidecar(out, "done")
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn key_line(k: &TrialKey) -> String {
    format!("{},{},{}", k.d, k.trial, k.method)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepSummary {
    pub trials_run: usize,
    pub trials_skipped: usize,
    pub rows_written: usize,
    pub failed_trials: usize,
}

pub fn csv_writer<W: Write>(w: W, headers: bool) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(headers).from_writer(w)
}

/// Serializes rows exactly as the sweep writes them (header included).
pub fn rows_to_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv_writer(Vec::new(), true);
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

pub fn read_rows(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Runs the sweep, writing rows to `out` in key order.
///
/// With `resume`, keys listed in the done file are kept (their rows are copied over) and the
/// rest is run; the manifest on disk must describe the same experiment.
pub fn sweep(config: &ExperimentConfig, out: &Path, resume: bool) -> Result<SweepSummary> {
    config.validate()?;
    let mpath = manifest_path(out);
    let dpath = done_path(out);
    let manifest = if resume && mpath.exists() {
        let m = Manifest::load(&mpath)?;
        if &m.config != config {
            return Err(HarnessError::ManifestMismatch(format!(
                "{} was written for a different configuration",
                mpath.display()
            )));
        }
        m
    } else {
        let m = build_manifest(config)?;
        m.save(&mpath)?;
        m
    };
    let keys = manifest.keys();

    let done: Vec<String> = if resume && dpath.exists() {
        BufReader::new(File::open(&dpath)?).lines().collect::<std::io::Result<_>>()?
    } else {
        Vec::new()
    };
    let mut skip = 0;
    for (line, key) in done.iter().zip(&keys) {
        if *line != key_line(key) {
            break;
        }
        skip += 1;
    }
    if skip < done.len() {
        log::warn!("done file lists {} keys but only the first {skip} match the sweep order", done.len());
    }

    // Keep the rows of completed keys and drop anything written after them.
    let kept: Vec<TraceRow> = if skip > 0 && out.exists() {
        let keep: std::collections::HashSet<(usize, usize, Method)> =
            keys[..skip].iter().map(|k| (k.d, k.trial, k.method)).collect();
        read_rows(out)?.into_iter().filter(|r| keep.contains(&(r.d, r.trial, r.method))).collect()
    } else {
        Vec::new()
    };
    let mut writer = csv_writer(File::create(out)?, true);
    for r in &kept {
        writer.serialize(r)?;
    }
    writer.flush()?;
    let mut done_file = File::create(&dpath)?;
    for k in &keys[..skip] {
        writeln!(done_file, "{}", key_line(k))?;
    }
    done_file.flush()?;

    let todo: Vec<(usize, TrialKey)> = keys.iter().copied().enumerate().skip(skip).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut summary = SweepSummary { trials_skipped: skip, rows_written: kept.len(), ..Default::default() };
    let (tx, rx) = mpsc::channel::<(usize, Result<TrialOutcome>)>();

    let write_result: Result<()> = std::thread::scope(|scope| {
        let manifest = &manifest;
        scope.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &(idx, key)| {
                    let _ = tx.send((idx, replay_trial(manifest, key)));
                });
            });
        });
        // Single consumer: buffer out-of-order results and emit them in key order.
        let mut pending: BTreeMap<usize, Result<TrialOutcome>> = BTreeMap::new();
        let mut next = skip;
        for (idx, outcome) in rx {
            pending.insert(idx, outcome);
            while let Some(outcome) = pending.remove(&next) {
                let outcome = outcome?;
                for r in &outcome.rows {
                    writer.serialize(r)?;
                }
                writer.flush()?;
                writeln!(done_file, "{}", key_line(&keys[next]))?;
                done_file.flush()?;
                summary.trials_run += 1;
                summary.rows_written += outcome.rows.len();
                summary.failed_trials += usize::from(outcome.failed);
                next += 1;
            }
        }
        Ok(())
    });
    write_result?;
    Ok(summary)
}

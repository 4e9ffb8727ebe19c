//! Synthetic-experiment harness: tasks, trials, sweeps, statistics and reports.

pub mod config;
pub mod demo;
mod error;
pub mod report;
pub mod seeds;
pub mod stats;
pub mod sweep;
pub mod task;
pub mod trial;

pub use config::{ExperimentConfig, Method};
pub use error::{HarnessError, Result};

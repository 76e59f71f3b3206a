//! Monte-Carlo harness: per-trial simulation, parallel experiment runs,
//! figure-style sweeps, box statistics and result files.

pub mod config;
pub mod emit;
pub mod stats;
pub mod sweep;
pub mod trial;
pub mod verify;

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use config::{ComponentSpec, ExperimentConfig, GroupKey, Method, NoiseDomain, TrafficSpec};
pub use emit::{emit_results, read_stats_csv, read_trials_csv, trial_rows, RunOutput};
pub use stats::{box_summary, summarize, BoxplotStats, TrialRow};
pub use trial::{run_trial, run_trial_in, TrialContext, TrialRecord};

/// Largest tolerated share of trials without an admissible packet selection.
pub const MAX_INFEASIBLE_FRACTION: f64 = 0.10;

/// Runs every trial of `config` in parallel and returns the feasible ones in
/// trial-index order. Infeasible trials are dropped with a warning unless
/// they exceed [`MAX_INFEASIBLE_FRACTION`]; any other error aborts the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let ctx = TrialContext::new(config)?;
    let results: Vec<Result<TrialRecord>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| run_trial_in(&ctx, i))
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut failed = 0;
    let mut last_reason = String::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(Error::InfeasibleWindow(reason)) => {
                failed += 1;
                last_reason = reason;
            }
            Err(e) => return Err(e),
        }
    }
    if failed as f64 > MAX_INFEASIBLE_FRACTION * config.trials as f64 {
        return Err(Error::TooManyInfeasible {
            failed,
            total: config.trials,
            reason: last_reason,
        });
    }
    if failed > 0 {
        warn!(
            "{failed} of {} trials dropped as infeasible: {last_reason}",
            config.trials
        );
    }
    let resamples: usize = records.iter().map(|r| r.resample_count).sum();
    let redraws: usize = records.iter().map(|r| r.velocity_redraws).sum();
    info!(
        "config {}: {} trials, {resamples} anchor resamples, {redraws} velocity redraws",
        config.hash(),
        records.len()
    );
    Ok(records)
}

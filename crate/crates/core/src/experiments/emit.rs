use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::stats::{summarize, BoxplotStats, TrialRow};
use super::trial::TrialRecord;
use crate::error::{Error, Result};

pub const TRIALS_HEADER: [&str; 13] = [
    "config_hash",
    "f2_ghz",
    "noise_deg",
    "t_max_ms",
    "packets",
    "beta1",
    "trial_index",
    "method",
    "v_true",
    "v_hat",
    "rel_error",
    "anchor_tdoa",
    "resample_count",
];

pub const STATS_HEADER: [&str; 12] = [
    "f2_ghz",
    "noise_deg",
    "t_max_ms",
    "packets",
    "beta1",
    "method",
    "count",
    "median",
    "lower_quartile",
    "upper_quartile",
    "lower_whisker",
    "upper_whisker",
];

/// The records of one configuration.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
}

pub fn trial_rows(config: &ExperimentConfig, records: &[TrialRecord]) -> Vec<TrialRow> {
    let hash = config.hash();
    let key = config.group_key();
    records
        .iter()
        .flat_map(|r| {
            r.estimates.iter().map(|e| TrialRow {
                config_hash: hash.clone(),
                f2_ghz: key.f2_ghz,
                noise_deg: key.noise_deg,
                t_max_ms: key.t_max_ms,
                packets: key.packets,
                beta1: key.beta1,
                trial_index: r.trial_index,
                method: e.method,
                v_true: r.v_true,
                v_hat: e.v_hat,
                rel_error: e.rel_error,
                anchor_tdoa: r.anchor_tdoa,
                resample_count: r.resample_count,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub trials: PathBuf,
    pub stats: PathBuf,
    pub run: PathBuf,
}

#[derive(Serialize)]
struct RunEntry<'a> {
    config_hash: String,
    seed: u64,
    trials_completed: usize,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    created_unix: u64,
    runs: Vec<RunEntry<'a>>,
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `trials.csv`, `stats.csv` and `run.json` into `out_dir`.
pub fn emit_results(runs: &[RunOutput], out_dir: impl AsRef<Path>) -> Result<EmittedFiles> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows: Vec<TrialRow> = runs
        .iter()
        .flat_map(|r| trial_rows(&r.config, &r.records))
        .collect();
    let stats = summarize(&rows);

    let files = EmittedFiles {
        trials: out_dir.join("trials.csv"),
        stats: out_dir.join("stats.csv"),
        run: out_dir.join("run.json"),
    };
    write_csv(&files.trials, &TRIALS_HEADER, &rows)?;
    write_csv(&files.stats, &STATS_HEADER, &stats)?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        runs: runs
            .iter()
            .map(|r| RunEntry {
                config_hash: r.config.hash(),
                seed: r.config.seed,
                trials_completed: r.records.len(),
                config: &r.config,
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&files.run, json + "\n").map_err(|e| Error::io(&files.run, e))?;
    Ok(files)
}

pub fn read_trials_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRow>> {
    read_csv(path.as_ref())
}

pub fn read_stats_csv(path: impl AsRef<Path>) -> Result<Vec<BoxplotStats>> {
    read_csv(path.as_ref())
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Method;
    use crate::experiments::trial::MethodEstimate;

    fn record(i: u64, e: f64) -> TrialRecord {
        TrialRecord {
            trial_index: i,
            stream_id: i,
            v_true: 10.0,
            estimates: vec![
                MethodEstimate {
                    method: Method::Multiband,
                    v_hat: 10.0 + 10.0 * e,
                    rel_error: e,
                },
                MethodEstimate {
                    method: Method::Iml,
                    v_hat: 10.0,
                    rel_error: 0.0,
                },
            ],
            anchor_tdoa: 2e-4,
            resample_count: 3,
            velocity_redraws: 0,
        }
    }

    #[test]
    fn empty_run_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&[], dir.path()).unwrap();
        let trials = fs::read_to_string(&files.trials).unwrap();
        assert_eq!(trials.trim_end(), TRIALS_HEADER.join(","));
        let stats = fs::read_to_string(&files.stats).unwrap();
        assert_eq!(stats.trim_end(), STATS_HEADER.join(","));
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&files.run).unwrap()).unwrap();
        assert!(v["runs"].as_array().unwrap().is_empty());
    }

    #[test]
    fn round_trip_reproduces_stats() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            seed: 1234,
            ..Default::default()
        };
        let records: Vec<_> = (0..25).map(|i| record(i, 1e-4 * (i as f64).sqrt())).collect();
        let files = emit_results(
            &[RunOutput {
                config: cfg.clone(),
                records,
            }],
            dir.path(),
        )
        .unwrap();
        let rows = read_trials_csv(&files.trials).unwrap();
        assert_eq!(rows.len(), 50);
        let stats = read_stats_csv(&files.stats).unwrap();
        assert_eq!(summarize(&rows), stats);
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&files.run).unwrap()).unwrap();
        assert_eq!(v["runs"][0]["seed"], 1234);
        assert_eq!(v["runs"][0]["config"]["seed"], 1234);
        assert_eq!(v["runs"][0]["config_hash"], cfg.hash());
    }

    #[test]
    fn unwritable_dir_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_results(&[], blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}

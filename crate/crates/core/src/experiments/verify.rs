//! Cross-checks of the exact solver against the brute-force oracles on
//! randomized instances drawn from the simulation pipeline.

use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, TrafficSpec};
use super::sweep::{SECOND_CARRIERS_GHZ, WINDOWS_MS};
use super::trial::{synthesize_trial, trial_rng, TrialContext};
use crate::error::Result;
use crate::measurements::MeasurementSystem;
use crate::solver::{solve_exact, solve_grid_oracle, solve_integer_enum_oracle, IlsProblem};

/// Search half-width used by every oracle comparison.
pub const ORACLE_V_SEARCH: f64 = 60.0;
pub const GRID_STEP: f64 = 1e-4;

/// A noisy system from the simulation pipeline with randomized carrier,
/// window and noise level. Traffic is dense enough that even the shortest
/// window holds a few packets.
pub fn random_system(seed: u64, index: u64, packets: &[usize], windows_ms: &[f64], max_noise_deg: f64) -> Result<MeasurementSystem> {
    let mut rng = trial_rng(seed ^ 0x5eed, index);
    let f2 = *SECOND_CARRIERS_GHZ.choose(&mut rng).expect("non-empty");
    let t_max = *windows_ms.choose(&mut rng).expect("non-empty");
    let noise = rng.random_range(0.0..=max_noise_deg);
    let cfg = ExperimentConfig {
        carriers: vec![2.4e9, f2 * 1e9],
        packets: packets.to_vec(),
        noise_deg: noise,
        t_max: t_max * 1e-3,
        seed: seed.wrapping_add(index),
        trials: 1,
        traffic: TrafficSpec::Poisson {
            rate: 100_000.0,
            duration: 0.2,
        },
        ..Default::default()
    };
    let ctx = TrialContext::new(&cfg)?;
    Ok(synthesize_trial(&ctx, 0)?.system)
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    pub max_dv: f64,
    pub max_dres: f64,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} instances, {} failures, max |dv| = {:.3e} m/s, max |dres| = {:.3e}, {:.2?}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.failures,
            self.max_dv,
            self.max_dres,
            self.elapsed
        )
    }
}

/// Exact solver against the dense grid: `|dv| <= 1e-6`, `|dres| <= 1e-9`.
pub fn check_grid_oracle(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let diffs: Vec<(f64, f64)> = (0..instances as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            // two bands of 2..=4 packets: at most 12 measurements
            let mut rng = trial_rng(seed, i);
            let packets = [rng.random_range(2..=4), rng.random_range(2..=4)];
            let sys = random_system(seed, i, &packets, &WINDOWS_MS, 20.0)?;
            let p = IlsProblem::new(sys, ORACLE_V_SEARCH)?;
            let e = solve_exact(&p)?;
            let g = solve_grid_oracle(&p, GRID_STEP)?;
            Ok(((e.v_hat - g.v_hat).abs(), (e.residual - g.residual).abs()))
        })
        .collect::<Result<_>>()?;
    Ok(summarize_diffs("exact vs grid oracle", &diffs, 1e-6, 1e-9, start))
}

/// Exact solver against lattice enumeration on systems of at most four
/// measurements: identical integers and `|dv| < 1e-9`.
pub fn check_enum_oracle(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let rows: Vec<(f64, f64, bool)> = (0..instances as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, bool)> {
            let mut rng = trial_rng(seed, i);
            let packets = match rng.random_range(0..3) {
                0 => [2, 2],
                1 => [2, 3],
                _ => [3, 2],
            };
            let sys = random_system(seed, i, &packets, &[0.1, 1.0], 20.0)?;
            let c_max = sys.coeffs().iter().copied().fold(0.0, f64::max);
            let bound = (ORACLE_V_SEARCH * c_max / std::f64::consts::TAU).ceil() as u32 + 1;
            let p = IlsProblem::new(sys, ORACLE_V_SEARCH)?;
            let e = solve_exact(&p)?;
            let o = solve_integer_enum_oracle(&p, bound)?;
            Ok((
                (e.v_hat - o.v_hat).abs(),
                (e.residual - o.residual).abs(),
                e.r_hat == o.r_hat,
            ))
        })
        .collect::<Result<_>>()?;
    let diffs: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let mut out = summarize_diffs("exact vs lattice enumeration", &diffs, f64::INFINITY, f64::INFINITY, start);
    out.failures = rows.iter().filter(|r| !(r.0 < 1e-9 && r.2)).count();
    Ok(out)
}

fn summarize_diffs(
    name: &'static str,
    diffs: &[(f64, f64)],
    dv_tol: f64,
    dres_tol: f64,
    start: Instant,
) -> CheckOutcome {
    CheckOutcome {
        name,
        instances: diffs.len(),
        failures: diffs
            .iter()
            .filter(|(dv, dr)| !(*dv <= dv_tol && *dr <= dres_tol))
            .count(),
        max_dv: diffs.iter().map(|d| d.0).fold(0.0, f64::max),
        max_dres: diffs.iter().map(|d| d.1).fold(0.0, f64::max),
        elapsed: start.elapsed(),
    }
}

/// The full oracle suite as run by `verify`.
pub fn run_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![check_grid_oracle(200, seed)?, check_enum_oracle(100, seed)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let a = check_grid_oracle(4, 1).unwrap();
        assert!(a.passed(), "{}", a.line());
        let b = check_enum_oracle(6, 1).unwrap();
        assert!(b.passed(), "{}", b.line());
        assert!(b.line().starts_with("PASS"));
    }

    #[test]
    fn random_systems_are_bounded() {
        for i in 0..5 {
            let s = random_system(3, i, &[2, 2], &[0.1, 1.0], 20.0).unwrap();
            assert_eq!(s.len(), 2);
            let c = s.coeffs().iter().copied().fold(0.0, f64::max);
            assert!(c < 3.0, "{c}");
        }
    }
}

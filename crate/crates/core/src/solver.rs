//! Integer least squares over one real velocity and one integer rotation
//! count per measurement:
//!
//! ```text
//! minimize  sum_n (y[n] - v * c[n] + 2 pi r[n])^2,   v in [-V, V],  r in Z^N,  r[anchor] = 0
//! ```
//!
//! For a fixed `v` every `r[n]` is optimal at the nearest integer of
//! `(v c[n] - y[n]) / 2pi`, so the problem collapses to minimizing the
//! univariate function
//!
//! ```text
//! F(v) = (y[a] - v c[a])^2 + sum_{n != a} d(y[n] - v c[n])^2
//! ```
//!
//! with `d` the wrap to `[-pi, pi)`. `F` is a continuous piecewise quadratic
//! whose pieces all share the curvature `sum c^2`; its breakpoints are the
//! velocities at which one rounding flips. [`solve_exact`] sweeps the sorted
//! breakpoints, keeping the running linear coefficient up to date in O(1) per
//! flip, and evaluates the closed-form minimizer of every piece that contains
//! its own stationary point.
//!
//! Two brute-force oracles ([`solve_grid_oracle`], [`solve_integer_enum_oracle`])
//! share none of that machinery and exist to cross-check it.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::MeasurementSystem;

/// Breakpoint budget of [`solve_exact`].
pub const MAX_BREAKPOINTS: u64 = 10_000_000;
/// Point budget of [`solve_grid_oracle`].
pub const MAX_GRID_POINTS: u64 = 100_000_000;
/// Lattice budget of [`solve_integer_enum_oracle`].
pub const MAX_LATTICE_POINTS: u64 = 10_000_000;
/// Breakpoints closer than this are treated as one.
pub const BREAKPOINT_MERGE_EPS: f64 = 1e-12;

const RESYNC_EVERY: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct IlsProblem {
    system: MeasurementSystem,
    y: Vec<f64>,
    curvature: f64,
    v_search: f64,
}

impl IlsProblem {
    pub fn new(system: MeasurementSystem, v_search: f64) -> Result<Self> {
        if !(v_search.is_finite() && v_search > 0.0) {
            return Err(Error::invalid(format!(
                "search half-width must be positive, got {v_search}"
            )));
        }
        let y = system.centered_y();
        let curvature = system.coeffs().iter().map(|c| c * c).sum();
        Ok(Self {
            system,
            y,
            curvature,
            v_search,
        })
    }

    pub fn system(&self) -> &MeasurementSystem {
        &self.system
    }

    pub fn v_search(&self) -> f64 {
        self.v_search
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Measurements as used by the objective (anchor as a signed phase).
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn coeffs(&self) -> &[f64] {
        self.system.coeffs()
    }

    pub fn anchor_index(&self) -> usize {
        self.system.anchor_index()
    }

    /// Weighted least-squares velocity for a fixed integer vector.
    fn conditional_velocity(&self, r: &[i64]) -> f64 {
        self.coeffs()
            .iter()
            .zip(&self.y)
            .zip(r)
            .map(|((c, y), &k)| c * (y + TAU * k as f64))
            .sum::<f64>()
            / self.curvature
    }

    fn objective_unchecked(&self, v: f64, r: &[i64]) -> f64 {
        self.coeffs()
            .iter()
            .zip(&self.y)
            .zip(r)
            .map(|((c, y), &k)| {
                let e = y - v * c + TAU * k as f64;
                e * e
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlsSolution {
    pub v_hat: f64,
    pub r_hat: Vec<i64>,
    /// Objective value at `(v_hat, r_hat)`, rad^2.
    pub residual: f64,
}

/// `sum_n (y[n] - v c[n] + 2 pi r[n])^2`.
pub fn objective(v: f64, r: &[i64], problem: &IlsProblem) -> Result<f64> {
    if r.len() != problem.len() {
        return Err(Error::invalid(format!(
            "integer vector has {} entries, system has {}",
            r.len(),
            problem.len()
        )));
    }
    if r[problem.anchor_index()] != 0 {
        return Err(Error::invalid("the anchor's integer must be 0"));
    }
    Ok(problem.objective_unchecked(v, r))
}

/// Per-coordinate optimal integers at a fixed velocity; halves round to even.
pub fn optimal_integers(v: f64, problem: &IlsProblem) -> Vec<i64> {
    let anchor = problem.anchor_index();
    problem
        .coeffs()
        .iter()
        .zip(problem.y())
        .enumerate()
        .map(|(n, (c, y))| {
            if n == anchor {
                0
            } else {
                ((v * c - y) / TAU).round_ties_even() as i64
            }
        })
        .collect()
}

fn finish(problem: &IlsProblem, v_hat: f64) -> IlsSolution {
    let r_hat = optimal_integers(v_hat, problem);
    let residual = problem.objective_unchecked(v_hat, &r_hat);
    IlsSolution {
        v_hat,
        r_hat,
        residual,
    }
}

/// Exact global minimizer by breakpoint enumeration.
pub fn solve_exact(problem: &IlsProblem) -> Result<IlsSolution> {
    let v_max = problem.v_search;
    let v_min = -v_max;
    let anchor = problem.anchor_index();
    let coeffs = problem.coeffs();
    let y = problem.y();
    let a = problem.curvature;

    // On piece k of measurement n, r[n] = k; the flip to k + 1 happens where
    // (v c - y) / 2pi = k + 1/2.
    let mut r: Vec<i64> = vec![0; problem.len()];
    let mut total: u64 = 0;
    let mut ranges = Vec::with_capacity(problem.len());
    for n in 0..problem.len() {
        if n == anchor {
            ranges.push((0, -1));
            continue;
        }
        let u_lo = (v_min * coeffs[n] - y[n]) / TAU;
        let u_hi = (v_max * coeffs[n] - y[n]) / TAU;
        let k_first = (u_lo - 0.5).ceil() as i64;
        let k_last = (u_hi - 0.5).floor() as i64;
        r[n] = k_first;
        if k_last >= k_first {
            total += (k_last - k_first + 1) as u64;
        }
        ranges.push((k_first, k_last));
    }
    if total > MAX_BREAKPOINTS {
        return Err(Error::ProblemTooLarge {
            breakpoints: total,
            limit: MAX_BREAKPOINTS,
        });
    }

    let mut breakpoints: Vec<(f64, u32)> = Vec::with_capacity(total as usize);
    for (n, &(k_first, k_last)) in ranges.iter().enumerate() {
        for k in k_first..=k_last {
            let v = (y[n] + TAU * (k as f64 + 0.5)) / coeffs[n];
            breakpoints.push((v.clamp(v_min, v_max), n as u32));
        }
    }
    breakpoints.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));

    let mut lin = problem.conditional_velocity(&r) * a;
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |v: f64, r: &[i64]| {
        let f = problem.objective_unchecked(v, r);
        if best.is_none_or(|(_, fb)| f < fb) {
            best = Some((v, f));
        }
    };

    // both ends of the search interval are candidates
    consider(v_min, &r);

    let slack = 1e-9;
    let mut lo = v_min;
    let mut since_resync = 0usize;
    let mut idx = 0;
    loop {
        let hi = breakpoints.get(idx).map_or(v_max, |b| b.0);
        if hi - lo > BREAKPOINT_MERGE_EPS {
            let stationary = lin / a;
            if stationary >= lo - slack && stationary <= hi + slack {
                let v = problem.conditional_velocity(&r).clamp(lo, hi);
                consider(v, &r);
            }
        }
        if idx == breakpoints.len() {
            consider(v_max, &r);
            break;
        }
        // apply every flip at (or merged into) this breakpoint
        let at = hi;
        while idx < breakpoints.len() && breakpoints[idx].0 - at <= BREAKPOINT_MERGE_EPS {
            let n = breakpoints[idx].1 as usize;
            r[n] += 1;
            lin += TAU * coeffs[n];
            idx += 1;
            since_resync += 1;
        }
        if since_resync >= RESYNC_EVERY {
            lin = problem.conditional_velocity(&r) * a;
            since_resync = 0;
        }
        lo = breakpoints[idx - 1].0;
    }

    let (v_hat, _) = best.expect("at least the interval ends were evaluated");
    Ok(finish(problem, v_hat))
}

/// Dense-grid oracle over `[-V, V]`, each grid local minimum within the
/// discretization slack of the best one polished by three-point parabolic
/// interpolation.
pub fn solve_grid_oracle(problem: &IlsProblem, step: f64) -> Result<IlsSolution> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }
    let v_max = problem.v_search;
    let points = (2.0 * v_max / step).floor() as u64 + 2;
    if points > MAX_GRID_POINTS {
        return Err(Error::invalid(format!(
            "grid of {points} points exceeds the limit of {MAX_GRID_POINTS}"
        )));
    }
    let y = problem.y();
    let coeffs = problem.coeffs();
    let anchor = problem.anchor_index();
    let wrapped_cost = |v: f64| -> f64 {
        let mut s = 0.0;
        for n in 0..y.len() {
            let e = y[n] - v * coeffs[n];
            let d = if n == anchor {
                e
            } else {
                e - TAU * (e / TAU).round()
            };
            s += d * d;
        }
        s
    };

    let mut grid: Vec<f64> = (0..points - 1).map(|k| -v_max + k as f64 * step).collect();
    grid.push(v_max);
    let values: Vec<f64> = grid.iter().map(|&v| wrapped_cost(v)).collect();
    let f_best = values.iter().copied().fold(f64::INFINITY, f64::min);

    let slack = problem.curvature * step * step + 1e-12;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..grid.len() {
        let left = if k > 0 { values[k - 1] } else { f64::INFINITY };
        let right = values.get(k + 1).copied().unwrap_or(f64::INFINITY);
        if values[k] > f_best + slack || values[k] > left || values[k] > right {
            continue;
        }
        let mut v = grid[k];
        let mut f = values[k];
        let mut h = step;
        while h > 1e-12 {
            let fl = wrapped_cost((v - h).max(-v_max));
            let fr = wrapped_cost((v + h).min(v_max));
            let curv = fl - 2.0 * f + fr;
            if curv > 0.0 {
                let cand = (v + 0.5 * h * (fl - fr) / curv).clamp(-v_max, v_max);
                let fc = wrapped_cost(cand);
                if fc < f {
                    v = cand;
                    f = fc;
                }
            }
            h *= 0.25;
        }
        if best.is_none_or(|(_, fb)| f < fb) {
            best = Some((v, f));
        }
    }
    let (v_hat, residual) = best.expect("the grid minimum is always a local minimum");
    let r_hat = (0..y.len())
        .map(|n| {
            if n == anchor {
                0
            } else {
                ((v_hat * coeffs[n] - y[n]) / TAU).round() as i64
            }
        })
        .collect();
    Ok(IlsSolution {
        v_hat,
        r_hat,
        residual,
    })
}

/// Exhaustive search over the integer box `[-r_bound, r_bound]^(N-1)` with
/// the closed-form conditional velocity for every lattice point.
pub fn solve_integer_enum_oracle(problem: &IlsProblem, r_bound: u32) -> Result<IlsSolution> {
    let free = problem.len() - 1;
    let side = 2 * r_bound as u64 + 1;
    let size = (0..free).try_fold(1u64, |acc, _| acc.checked_mul(side));
    match size {
        Some(s) if s <= MAX_LATTICE_POINTS => {}
        _ => {
            return Err(Error::invalid(format!(
                "lattice box ({side})^{free} exceeds the limit of {MAX_LATTICE_POINTS}"
            )))
        }
    }
    let anchor = problem.anchor_index();
    let y = problem.y();
    let coeffs = problem.coeffs();
    let sum_c2: f64 = coeffs.iter().map(|c| c * c).sum();
    let v_max = problem.v_search;
    let bound = r_bound as i64;

    let mut r = vec![-bound; problem.len()];
    r[anchor] = 0;
    let free_idx: Vec<usize> = (0..problem.len()).filter(|&n| n != anchor).collect();
    let mut best: Option<(f64, Vec<i64>, f64)> = None;
    loop {
        let num: f64 = (0..y.len())
            .map(|n| coeffs[n] * (y[n] + 2.0 * PI * r[n] as f64))
            .sum();
        let v = (num / sum_c2).clamp(-v_max, v_max);
        let f: f64 = (0..y.len())
            .map(|n| (y[n] + 2.0 * PI * r[n] as f64 - v * coeffs[n]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(_, _, fb)| f < *fb) {
            best = Some((v, r.clone(), f));
        }
        // odometer increment over the free coordinates
        let mut carry = true;
        for &n in &free_idx {
            if r[n] < bound {
                r[n] += 1;
                carry = false;
                break;
            }
            r[n] = -bound;
        }
        if carry {
            break;
        }
    }
    let (v_hat, r_hat, residual) = best.expect("the lattice box is never empty");
    Ok(IlsSolution {
        v_hat,
        r_hat,
        residual,
    })
}

/// Which solver the multiband estimator runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SolverKind {
    Exact,
    Grid { step: f64 },
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::Exact
    }
}

impl SolverKind {
    pub fn solve(&self, problem: &IlsProblem) -> Result<IlsSolution> {
        match *self {
            SolverKind::Exact => solve_exact(problem),
            SolverKind::Grid { step } => solve_grid_oracle(problem, step),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{wrap_phase, Band, SPEED_OF_LIGHT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(y: Vec<f64>, c: Vec<f64>, v_search: f64) -> IlsProblem {
        IlsProblem::new(MeasurementSystem::from_parts(y, c).unwrap(), v_search).unwrap()
    }

    fn noiseless(v: f64, coeffs: &[f64]) -> Vec<f64> {
        coeffs.iter().map(|c| wrap_phase(v * c).unwrap()).collect()
    }

    #[test]
    fn objective_examples() {
        let p = problem(vec![0.0], vec![1.0], 10.0);
        assert_eq!(objective(0.0, &[0], &p).unwrap(), 0.0);
        let p = problem(vec![PI], vec![1.0], 10.0);
        assert!((objective(0.0, &[0], &p).unwrap() - PI * PI).abs() < 1e-12);
        assert!(objective(0.0, &[0, 0], &p).is_err());
        assert!(objective(0.0, &[1], &p).is_err());

        let coeffs = [0.03, 1.7, 12.5, 40.0];
        let v = 17.3;
        let p = problem(noiseless(v, &coeffs), coeffs.to_vec(), 60.0);
        let r = optimal_integers(v, &p);
        assert!(objective(v, &r, &p).unwrap() < 1e-18);
    }

    #[test]
    fn rounding_examples() {
        // v c - y = 2 pi 3 + 0.1
        let y = 0.5;
        let c = 2.0;
        let v = (TAU * 3.0 + 0.1 + y) / c;
        let p = problem(vec![0.0, y], vec![1.0, c], 100.0);
        assert_eq!(optimal_integers(v, &p), vec![0, 3]);

        // exact half rotation rounds to even
        let p = problem(vec![0.0, 0.0], vec![1.0, 1.0], 100.0);
        assert_eq!(optimal_integers(PI, &p)[1], 0);
        assert_eq!(optimal_integers(3.0 * PI, &p)[1], 2);
    }

    #[test]
    fn rounding_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let c: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..50.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..TAU)).collect();
            let v = rng.random_range(-60.0..60.0);
            let p = problem(y.clone(), c.clone(), 60.0);
            let r = optimal_integers(v, &p);
            let yc = p.y();
            for n in 1..5 {
                let term = |k: i64| (yc[n] - v * c[n] + TAU * k as f64).powi(2);
                for z in r[n] - 5..=r[n] + 5 {
                    assert!(term(r[n]) <= term(z) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn anchor_only_is_exact() {
        for &theta in &[0.7, -2.9, 3.0] {
            let p = problem(vec![wrap_phase(theta).unwrap()], vec![0.05], 100.0);
            let s = solve_exact(&p).unwrap();
            assert!((s.v_hat - theta / 0.05).abs() < 1e-9);
            assert!(s.residual < 1e-20);
        }
    }

    #[test]
    fn invalid_search_interval() {
        let sys = MeasurementSystem::from_parts(vec![0.1], vec![1.0]).unwrap();
        assert!(IlsProblem::new(sys.clone(), 0.0).is_err());
        assert!(IlsProblem::new(sys, f64::NAN).is_err());
    }

    #[test]
    fn breakpoint_guard() {
        let p = problem(vec![0.1, 0.2], vec![1.0, 1e6], 100.0);
        assert!(matches!(solve_exact(&p), Err(Error::ProblemTooLarge { .. })));
    }

    #[test]
    fn noiseless_recovery() {
        let b1 = Band::new(2.4e9, 20e6).unwrap();
        let b2 = Band::new(60e9, 20e6).unwrap();
        let t1 = [0.0, 0.3e-3, 4.1e-3, 8.7e-3];
        let t2 = [0.0, 2.2e-3, 6.0e-3, 9.5e-3];
        for &v in &[30.0, -41.3, 0.8, 49.99] {
            let mut y = Vec::new();
            let mut c = Vec::new();
            for (b, t) in [(&b1, &t1), (&b2, &t2)] {
                for i in 0..4 {
                    for j in i + 1..4 {
                        let cc = b.phase_coefficient(t[j] - t[i]);
                        c.push(cc);
                        y.push(wrap_phase(cc * v).unwrap());
                    }
                }
            }
            let p = problem(y, c, 60.0);
            let s = solve_exact(&p).unwrap();
            assert!((s.v_hat - v).abs() < 1e-9, "v={v} got {}", s.v_hat);
            assert!(s.residual < 1e-15);
            assert_eq!(s.r_hat, optimal_integers(s.v_hat, &p));
        }
        assert!(SPEED_OF_LIGHT > 0.0);
    }

    #[test]
    fn grid_oracle_examples() {
        let coeffs = [0.04, 2.0, 9.0];
        let v = -12.34567;
        let p = problem(noiseless(v, &coeffs), coeffs.to_vec(), 20.0);
        let g = solve_grid_oracle(&p, 1e-4).unwrap();
        assert!((g.v_hat - v).abs() <= 1e-4);
        let e = solve_exact(&p).unwrap();
        assert!(g.residual >= e.residual - 1e-12);
        assert!(solve_grid_oracle(&p, 0.0).is_err());
        assert!(solve_grid_oracle(&p, 1e-9).is_err());
    }

    #[test]
    fn grid_refinement_does_not_increase_residual() {
        let p = problem(vec![1.0, 4.0, 2.5], vec![0.05, 3.0, 7.0], 10.0);
        let coarse = solve_grid_oracle(&p, 1e-2).unwrap();
        let fine = solve_grid_oracle(&p, 5e-3).unwrap();
        assert!(fine.residual <= coarse.residual + 1e-12);
    }

    #[test]
    fn enum_oracle_examples() {
        let coeffs = [0.05, 0.9, 1.4];
        let v = 7.7;
        let p = problem(noiseless(v, &coeffs), coeffs.to_vec(), 10.0);
        let s = solve_integer_enum_oracle(&p, 5).unwrap();
        assert!((s.v_hat - v).abs() < 1e-9);

        // without ambiguity the oracle is plain weighted least squares
        let y = vec![0.1, 0.25, -0.05];
        let c = vec![0.02, 0.05, 0.01];
        let p = problem(y.clone(), c.clone(), 100.0);
        let s = solve_integer_enum_oracle(&p, 0).unwrap();
        let wls = y.iter().zip(&c).map(|(y, c)| y * c).sum::<f64>()
            / c.iter().map(|c| c * c).sum::<f64>();
        assert!((s.v_hat - wls).abs() < 1e-12);

        let big = problem(vec![0.0; 9], vec![1.0; 9], 10.0);
        assert!(solve_integer_enum_oracle(&big, 10).is_err());
    }

    #[test]
    fn exact_is_deterministic() {
        let p = problem(vec![0.3, 5.0, 1.0, 2.0], vec![0.05, 13.0, 40.0, 77.0], 60.0);
        let a = solve_exact(&p).unwrap();
        let b = solve_exact(&p).unwrap();
        assert_eq!(a.v_hat.to_bits(), b.v_hat.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn free_anchor_makes_optimum_non_unique() {
        // Single band, all integers free: shifting v by 2pi / c on a
        // commensurate instance leaves every wrapped residual unchanged.
        let c = [1.0, 2.0, 3.0];
        let v = 0.4;
        let y: Vec<f64> = c.iter().map(|c| wrap_phase(c * v).unwrap()).collect();
        let free_cost = |v: f64| -> f64 {
            y.iter()
                .zip(&c)
                .map(|(y, c)| {
                    let e = y - v * c;
                    (e - TAU * (e / TAU).round()).powi(2)
                })
                .sum()
        };
        let shifted = v + TAU;
        assert!(free_cost(v) < 1e-12);
        assert!(free_cost(shifted) < 1e-12);
        assert!((shifted - v).abs() > 1.0);

        // pinning the anchor removes the alias inside the unambiguous range
        let p = problem(y.clone(), c.to_vec(), PI);
        let s = solve_exact(&p).unwrap();
        assert!((s.v_hat - v).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1usize..7).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.0f64..TAU, n),
                    proptest::collection::vec(0.01f64..15.0, n),
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn exact_is_global((y, c) in instance()) {
                let p = problem(y, c, 20.0);
                let s = solve_exact(&p).unwrap();
                prop_assert!(s.v_hat.abs() <= 20.0);
                prop_assert!(s.residual >= 0.0);
                prop_assert_eq!(s.r_hat[0], 0);
                prop_assert_eq!(&s.r_hat, &optimal_integers(s.v_hat, &p));
                let steps = 20_000;
                for k in 0..=steps {
                    let v = -20.0 + 40.0 * k as f64 / steps as f64;
                    let f = objective(v, &optimal_integers(v, &p), &p).unwrap();
                    prop_assert!(s.residual <= f + 1e-12, "v={} f={} best={}", v, f, s.residual);
                }
            }
        }
    }
}

//! Comparison estimators: a grid-and-zoom maximizer of the wrapped-Gaussian
//! likelihood product over all bands, and integer least squares restricted to
//! one band.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::MeasurementSystem;
use crate::model::principal_phase;
use crate::solver::{solve_exact, IlsProblem, IlsSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImlOptions {
    /// Half-width of the initial velocity grid, m/s.
    pub grid_half_width: f64,
    pub initial_grid_points: usize,
    pub zoom_rounds: usize,
    pub zoom_factor: f64,
    /// Terms on each side of the wrapped sum; `None` picks
    /// [`default_wrap_terms`] from `sigma`.
    pub wrap_terms: Option<usize>,
}

impl Default for ImlOptions {
    fn default() -> Self {
        Self {
            grid_half_width: 60.0,
            initial_grid_points: 4001,
            zoom_rounds: 4,
            zoom_factor: 10.0,
            wrap_terms: None,
        }
    }
}

impl ImlOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_half_width.is_finite() && self.grid_half_width > 0.0) {
            return Err(Error::invalid("IML grid half-width must be positive"));
        }
        if self.initial_grid_points < 2 {
            return Err(Error::invalid("IML grid needs at least 2 points"));
        }
        if !(self.zoom_factor.is_finite() && self.zoom_factor > 1.0) {
            return Err(Error::invalid("IML zoom factor must exceed 1"));
        }
        if self.wrap_terms == Some(0) {
            return Err(Error::invalid("IML wrap terms must be positive"));
        }
        Ok(())
    }

    /// Grid spacing of the last zoom round.
    pub fn final_step(&self) -> f64 {
        2.0 * self.grid_half_width
            / (self.initial_grid_points - 1) as f64
            / self.zoom_factor.powi(self.zoom_rounds as i32)
    }
}

/// Smallest `K` whose `|k| <= K` terms cover the reduced residual plus six
/// standard deviations, with one extra term of margin.
pub fn default_wrap_terms(sigma: f64) -> usize {
    ((std::f64::consts::PI + 6.0 * sigma) / TAU).ceil() as usize + 1
}

/// Log of the wrapped Gaussian density (unnormalized) of `phi` around
/// `theta_of_v`, truncated to `|k| <= wrap_terms`.
///
/// The residual is reduced to `[-pi, pi)` before summing, so the result is
/// exactly periodic in `theta_of_v`.
pub fn wrapped_loglik(phi: f64, theta_of_v: f64, sigma: f64, wrap_terms: usize) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(wrapped_loglik_unchecked(phi - theta_of_v, sigma, wrap_terms))
}

fn wrapped_loglik_unchecked(residual: f64, sigma: f64, wrap_terms: usize) -> f64 {
    let e = principal_phase(residual);
    let inv = 0.5 / (sigma * sigma);
    // the k = 0 term is the largest since |e| <= pi
    let peak = -e * e * inv;
    let mut acc = 1.0;
    for k in 1..=wrap_terms as i64 {
        let s = TAU * k as f64;
        let up = e + s;
        let down = e - s;
        acc += (-(up * up) * inv - peak).exp() + (-(down * down) * inv - peak).exp();
    }
    peak + acc.ln()
}

struct ImlObjective<'a> {
    y: Vec<f64>,
    coeffs: &'a [f64],
    anchor: usize,
    sigma: f64,
    terms: usize,
}

impl ImlObjective<'_> {
    fn eval(&self, v: f64) -> f64 {
        let inv = 0.5 / (self.sigma * self.sigma);
        let mut s = 0.0;
        for n in 0..self.y.len() {
            let r = self.y[n] - self.coeffs[n] * v;
            s += if n == self.anchor {
                -r * r * inv
            } else {
                wrapped_loglik_unchecked(r, self.sigma, self.terms)
            };
        }
        s
    }
}

/// Result of [`solve_iml`] with the incumbent after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct ImlTrace {
    pub v_hat: f64,
    pub loglik: f64,
    /// Incumbent log-likelihood after the initial grid and each zoom round.
    pub rounds: Vec<f64>,
}

/// Total log-likelihood of `v`; the anchor contributes a plain Gaussian term.
pub fn iml_loglik(system: &MeasurementSystem, sigma: f64, wrap_terms: usize, v: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(objective_for(system, sigma, wrap_terms).eval(v))
}

fn objective_for(system: &MeasurementSystem, sigma: f64, terms: usize) -> ImlObjective<'_> {
    ImlObjective {
        y: system.centered_y(),
        coeffs: system.coeffs(),
        anchor: system.anchor_index(),
        sigma,
        terms,
    }
}

pub fn solve_iml_traced(
    system: &MeasurementSystem,
    sigma: f64,
    options: &ImlOptions,
) -> Result<ImlTrace> {
    options.validate()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let terms = options.wrap_terms.unwrap_or_else(|| default_wrap_terms(sigma));
    let obj = objective_for(system, sigma, terms);
    let limit = options.grid_half_width;
    let points = options.initial_grid_points;

    let mut best_v = f64::NAN;
    let mut best = f64::NEG_INFINITY;
    let mut center = 0.0;
    let mut half = limit;
    let mut rounds = Vec::with_capacity(options.zoom_rounds + 1);
    for _ in 0..=options.zoom_rounds {
        let step = 2.0 * half / (points - 1) as f64;
        for k in 0..points {
            let v = center - half + k as f64 * step;
            if v < -limit || v > limit {
                continue;
            }
            let f = obj.eval(v);
            if f > best || (f == best && v < best_v) {
                best = f;
                best_v = v;
            }
        }
        rounds.push(best);
        center = best_v;
        half /= options.zoom_factor;
    }
    Ok(ImlTrace {
        v_hat: best_v,
        loglik: best,
        rounds,
    })
}

/// Grid-and-zoom maximum-likelihood velocity.
pub fn solve_iml(system: &MeasurementSystem, sigma: f64, options: &ImlOptions) -> Result<f64> {
    solve_iml_traced(system, sigma, options).map(|t| t.v_hat)
}

/// Integer least squares on one band's pairs, with that band's smallest-TDOA
/// pair treated as unambiguous.
pub fn solve_single_band(
    system: &MeasurementSystem,
    band_index: usize,
    v_search: f64,
) -> Result<IlsSolution> {
    let sub = system.restrict_to_band(band_index)?;
    solve_exact(&IlsProblem::new(sub, v_search)?)
}

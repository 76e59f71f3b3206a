//! Pairwise wrapped phase differences and the stacked linear system
//! `y = v * a - 2 pi r + w` they define.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wrap_to_tau, Band, BandSet, SPEED_OF_LIGHT};
use crate::traffic::ToaSelection;

/// One wrapped phase difference between packets `i < j` of a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub band_index: usize,
    pub i: usize,
    pub j: usize,
    /// `toa[j] - toa[i]`, seconds.
    pub tdoa: f64,
    /// `psi[j] - psi[i]` wrapped to `[0, 2pi)`.
    pub wrapped_phase: f64,
}

/// All `N (N - 1) / 2` pairs of one band, ordered lexicographically by `(i, j)`.
pub fn pairwise_differences(psis: &[f64], toas: &[f64], band_index: usize) -> Result<Vec<PhasePair>> {
    if psis.len() != toas.len() {
        return Err(Error::invalid(format!(
            "{} phases for {} arrival times",
            psis.len(),
            toas.len()
        )));
    }
    if toas.len() < 2 {
        return Err(Error::invalid(format!(
            "band {band_index} needs at least 2 packets, got {}",
            toas.len()
        )));
    }
    if psis.iter().chain(toas).any(|x| !x.is_finite()) {
        return Err(Error::invalid("phases and arrival times must be finite"));
    }
    if toas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("arrival times must be strictly ascending"));
    }
    let n = toas.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(PhasePair {
                band_index,
                i,
                j,
                tdoa: toas[j] - toas[i],
                wrapped_phase: wrap_to_tau(psis[j] - psis[i]),
            });
        }
    }
    Ok(pairs)
}

/// Sorts `(toa, psi)` packets by arrival time before pairing them.
pub fn pairwise_from_packets(packets: &[(f64, f64)], band_index: usize) -> Result<Vec<PhasePair>> {
    let mut sorted = packets.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (toas, psis): (Vec<f64>, Vec<f64>) = sorted.into_iter().unzip();
    pairwise_differences(&psis, &toas, band_index)
}

/// Unwrapped phase accumulated over `tdoa`: `4 pi v f dt / c`.
pub fn true_phase(v: f64, band: &Band, tdoa: f64) -> f64 {
    4.0 * PI * v * band.carrier_freq() * tdoa / SPEED_OF_LIGHT
}

/// Integer `R` with `theta - 2 pi R - phi` in `[-pi, pi)`.
pub fn integer_rotations(theta: f64, phi: f64) -> i64 {
    ((theta - phi + PI) / TAU).floor() as i64
}

/// Stacked measurements, band-major. The anchor entry has its integer fixed
/// at zero and is read as a signed phase in `[-pi, pi)` by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSystem {
    y: Vec<f64>,
    coeffs: Vec<f64>,
    band_of: Vec<usize>,
    tdoas: Vec<f64>,
    anchor_index: usize,
}

impl MeasurementSystem {
    /// Assembles a system from raw vectors. `tdoas` are optional metadata and
    /// may be empty.
    pub fn new(
        y: Vec<f64>,
        coeffs: Vec<f64>,
        band_of: Vec<usize>,
        tdoas: Vec<f64>,
        anchor_index: usize,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("a measurement system needs at least one entry"));
        }
        if coeffs.len() != n || band_of.len() != n || !(tdoas.is_empty() || tdoas.len() == n) {
            return Err(Error::invalid(format!(
                "length mismatch: y {n}, coeffs {}, band_of {}, tdoas {}",
                coeffs.len(),
                band_of.len(),
                tdoas.len()
            )));
        }
        if anchor_index >= n {
            return Err(Error::invalid(format!(
                "anchor index {anchor_index} out of range for {n} measurements"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurements must be finite"));
        }
        if coeffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("velocity coefficients must be positive"));
        }
        Ok(Self {
            y,
            coeffs,
            band_of,
            tdoas,
            anchor_index,
        })
    }

    /// Single-band system with the anchor at entry 0.
    pub fn from_parts(y: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, coeffs, vec![0; n], Vec::new(), 0)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn band_of(&self) -> &[usize] {
        &self.band_of
    }

    pub fn tdoas(&self) -> &[f64] {
        &self.tdoas
    }

    pub fn anchor_index(&self) -> usize {
        self.anchor_index
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Measurement vector with the anchor replaced by its principal value in
    /// `[-pi, pi)`; this is the `y` every objective is evaluated against.
    pub fn centered_y(&self) -> Vec<f64> {
        let mut y = self.y.clone();
        y[self.anchor_index] = crate::model::principal_phase(y[self.anchor_index]);
        y
    }

    /// Sub-system of one band's entries with the smallest-TDOA pair as anchor.
    pub fn restrict_to_band(&self, band: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len()).filter(|&n| self.band_of[n] == band).collect();
        if idx.is_empty() {
            return Err(Error::invalid(format!("band {band} has no measurements")));
        }
        let pick = |v: &[f64]| idx.iter().map(|&n| v[n]).collect::<Vec<f64>>();
        let tdoas = if self.tdoas.is_empty() {
            Vec::new()
        } else {
            pick(&self.tdoas)
        };
        let coeffs = pick(&self.coeffs);
        // coefficient is proportional to the TDOA within a band
        let anchor = coeffs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        Self::new(pick(&self.y), coeffs, vec![band; idx.len()], tdoas, anchor)
    }
}

/// Stacks every band's pairs in band order; the anchor is band 0's `(0, 1)` pair.
pub fn build_system(
    selection: &ToaSelection,
    per_band_pairs: &[Vec<PhasePair>],
    bands: &BandSet,
) -> Result<MeasurementSystem> {
    if per_band_pairs.len() != bands.len() || selection.band_count() != bands.len() {
        return Err(Error::invalid(format!(
            "{} bands, {} pair lists, {} TOA lists",
            bands.len(),
            per_band_pairs.len(),
            selection.band_count()
        )));
    }
    if selection.per_band()[0].len() < 2 {
        return Err(Error::invalid("anchor band needs at least 2 packets"));
    }
    let total: usize = per_band_pairs.iter().map(Vec::len).sum();
    let mut y = Vec::with_capacity(total);
    let mut coeffs = Vec::with_capacity(total);
    let mut band_of = Vec::with_capacity(total);
    let mut tdoas = Vec::with_capacity(total);
    for (q, (pairs, band)) in per_band_pairs.iter().zip(bands.bands()).enumerate() {
        let toas = &selection.per_band()[q];
        if pairs.len() != crate::model::pair_count(toas.len()) {
            return Err(Error::invalid(format!(
                "band {q}: {} pairs for {} packets",
                pairs.len(),
                toas.len()
            )));
        }
        for p in pairs {
            if p.band_index != q {
                return Err(Error::invalid(format!(
                    "pair tagged with band {} listed under band {q}",
                    p.band_index
                )));
            }
            y.push(p.wrapped_phase);
            coeffs.push(band.phase_coefficient(p.tdoa));
            band_of.push(q);
            tdoas.push(p.tdoa);
        }
    }
    let anchor = per_band_pairs[0]
        .first()
        .filter(|p| p.i == 0 && p.j == 1)
        .ok_or_else(|| Error::invalid("anchor pair (0, 1) missing from band 0"))?;
    debug_assert!(anchor.tdoa > 0.0);
    MeasurementSystem::new(y, coeffs, band_of, tdoas, 0)
}

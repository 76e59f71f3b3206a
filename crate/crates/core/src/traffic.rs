//! Packet arrival times: trace files, synthetic arrival processes and the
//! per-band TOA selection used by every trial.
//!
//! Trace files are plain text with one timestamp in seconds per line. Blank
//! lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest recorded inter-packet time in the reference Wi-Fi traces, seconds.
pub const DEFAULT_T_MIN: f64 = 0.0385e-3;
/// Default retry budget for a single TOA selection.
pub const DEFAULT_SELECT_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    toas: Vec<f64>,
    source_label: String,
}

impl TrafficTrace {
    /// Sorts and deduplicates; requires at least two distinct, finite,
    /// non-negative timestamps.
    pub fn from_toas(mut toas: Vec<f64>, source_label: impl Into<String>) -> Result<Self> {
        if let Some(bad) = toas.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::invalid(format!(
                "timestamps must be finite and >= 0, got {bad}"
            )));
        }
        toas.sort_by(f64::total_cmp);
        toas.dedup();
        if toas.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a trace needs at least 2 distinct timestamps, got {}",
                toas.len()
            )));
        }
        Ok(Self {
            toas,
            source_label: source_label.into(),
        })
    }

    pub fn toas(&self) -> &[f64] {
        &self.toas
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.toas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.toas.is_empty()
    }

    pub fn inter_arrivals(&self) -> impl Iterator<Item = f64> + '_ {
        self.toas.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_inter_arrival(&self) -> f64 {
        self.inter_arrivals().fold(f64::INFINITY, f64::min)
    }

    pub fn max_inter_arrival(&self) -> f64 {
        self.inter_arrivals().fold(0.0, f64::max)
    }

    /// Largest number of TOAs that fit in any closed window of length `span`.
    fn max_in_window(&self, span: f64) -> usize {
        let mut best = 0;
        let mut hi = 0;
        for lo in 0..self.toas.len() {
            while hi < self.toas.len() && self.toas[hi] - self.toas[lo] <= span {
                hi += 1;
            }
            best = best.max(hi - lo);
        }
        best
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<TrafficTrace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut toas = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => toas.push(t),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    content: line.to_string(),
                })
            }
        }
    }
    TrafficTrace::from_toas(toas, path.display().to_string())
}

/// Synthetic arrival processes.
#[derive(Debug, Clone, PartialEq)]
pub enum TrafficModel {
    /// Exponential inter-arrivals with mean `1 / rate`.
    Poisson { rate: f64 },
    /// Arithmetic sequence starting at 0.
    UniformGrid { step: f64 },
    /// Inter-arrival bootstrap from a recorded trace.
    EmpiricalResample { base: TrafficTrace },
}

pub fn gen_synthetic_trace<R: Rng + ?Sized>(
    model: &TrafficModel,
    duration: f64,
    rng: &mut R,
) -> Result<TrafficTrace> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    let toas = match model {
        TrafficModel::Poisson { rate } => {
            let exp = Exp::new(*rate)
                .ok()
                .filter(|_| rate.is_finite() && *rate > 0.0)
                .ok_or_else(|| Error::invalid(format!("poisson rate must be positive, got {rate}")))?;
            let mut toas = Vec::with_capacity((rate * duration * 1.1) as usize + 2);
            let mut t = exp.sample(rng);
            while t < duration {
                toas.push(t);
                t += exp.sample(rng);
            }
            toas
        }
        TrafficModel::UniformGrid { step } => {
            if !(step.is_finite() && *step > 0.0) {
                return Err(Error::invalid(format!("grid step must be positive, got {step}")));
            }
            let n = ((duration / step) * (1.0 - 1e-12)).ceil() as usize;
            (0..n).map(|k| k as f64 * step).collect()
        }
        TrafficModel::EmpiricalResample { base } => {
            let gaps: Vec<f64> = base.inter_arrivals().collect();
            let mut toas = vec![0.0];
            let mut t = gaps[rng.random_range(0..gaps.len())];
            while t < duration {
                toas.push(t);
                t += gaps[rng.random_range(0..gaps.len())];
            }
            toas
        }
    };
    let label = match model {
        TrafficModel::Poisson { rate } => format!("poisson:{rate}"),
        TrafficModel::UniformGrid { step } => format!("uniform-grid:{step}"),
        TrafficModel::EmpiricalResample { base } => format!("resample:{}", base.source_label),
    };
    TrafficTrace::from_toas(toas, label)
}

/// Admissible span of a per-band selection: at most `t_max` between first
/// and last packet, and at least `t_min` between consecutive packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingWindow {
    t_min: f64,
    t_max: f64,
}

impl SamplingWindow {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && 0.0 < t_min && t_min < t_max) {
            return Err(Error::invalid(format!(
                "sampling window needs 0 < t_min < t_max, got ({t_min}, {t_max})"
            )));
        }
        Ok(Self { t_min, t_max })
    }

    pub fn with_t_max(t_max: f64) -> Result<Self> {
        Self::new(DEFAULT_T_MIN, t_max)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Minimum consecutive gap enforced for `n` packets. The `t_min` spacing
    /// is dropped when `n` packets at that spacing cannot fit in `t_max`.
    pub fn min_gap_for(&self, n: usize) -> f64 {
        if (n.saturating_sub(1)) as f64 * self.t_min < self.t_max {
            self.t_min
        } else {
            0.0
        }
    }
}

/// Per-band TOAs, each list re-zeroed to its earliest packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToaSelection {
    per_band: Vec<Vec<f64>>,
}

impl ToaSelection {
    /// Validates and re-zeroes caller-provided TOAs. Every list needs at
    /// least 2 strictly ascending entries.
    pub fn new(per_band: Vec<Vec<f64>>) -> Result<Self> {
        if per_band.is_empty() {
            return Err(Error::invalid("selection needs at least one band"));
        }
        let per_band = per_band
            .into_iter()
            .enumerate()
            .map(|(q, toas)| {
                if toas.len() < 2 {
                    return Err(Error::invalid(format!(
                        "band {q} needs at least 2 packets, got {}",
                        toas.len()
                    )));
                }
                if toas.iter().any(|t| !t.is_finite()) || toas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid(format!(
                        "band {q} TOAs must be finite and strictly ascending"
                    )));
                }
                let t0 = toas[0];
                Ok(toas.into_iter().map(|t| t - t0).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_band })
    }

    pub fn per_band(&self) -> &[Vec<f64>] {
        &self.per_band
    }

    pub fn band(&self, q: usize) -> Option<&[f64]> {
        self.per_band.get(q).map(Vec::as_slice)
    }

    pub fn band_count(&self) -> usize {
        self.per_band.len()
    }

    /// TDOA between the two earliest packets of band 0.
    pub fn anchor_tdoa(&self) -> f64 {
        self.per_band[0][1] - self.per_band[0][0]
    }
}

enum Rejection {
    TooFewInWindow,
    GapBelowMin,
}

fn select_band<R: Rng + ?Sized>(
    trace: &TrafficTrace,
    n: usize,
    window: &SamplingWindow,
    max_retries: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let picks = pick_band(trace, n, window, max_retries, rng)?;
    let t0 = picks[0];
    Ok(picks.into_iter().map(|t| t - t0).collect())
}

/// Recorded TOAs chosen for one band, before re-zeroing.
fn pick_band<R: Rng + ?Sized>(
    trace: &TrafficTrace,
    n: usize,
    window: &SamplingWindow,
    max_retries: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let toas = trace.toas();
    let first = toas[0];
    let last = toas[toas.len() - 1];
    let latest_start = (last - window.t_max).max(first);
    let min_gap = window.min_gap_for(n);
    let mut too_few = 0usize;
    let mut tight = 0usize;

    for _ in 0..max_retries.max(1) {
        let start = if latest_start > first {
            rng.random_range(first..latest_start)
        } else {
            first
        };
        let lo = toas.partition_point(|&t| t < start);
        let hi = toas.partition_point(|&t| t <= start + window.t_max);
        let available = hi - lo;
        let outcome = if available < n {
            Err(Rejection::TooFewInWindow)
        } else {
            let mut picks: Vec<f64> = index::sample(rng, available, n)
                .into_iter()
                .map(|i| toas[lo + i])
                .collect();
            picks.sort_by(f64::total_cmp);
            if picks.windows(2).all(|w| w[1] - w[0] >= min_gap && w[1] > w[0]) {
                Ok(picks)
            } else {
                Err(Rejection::GapBelowMin)
            }
        };
        match outcome {
            Ok(picks) => return Ok(picks),
            Err(Rejection::TooFewInWindow) => too_few += 1,
            Err(Rejection::GapBelowMin) => tight += 1,
        }
    }

    let capacity = trace.max_in_window(window.t_max);
    let reason = if capacity < n {
        format!(
            "no window of length t_max = {} s holds {n} packets (at most {capacity})",
            window.t_max
        )
    } else if tight >= too_few {
        format!(
            "consecutive gaps below t_min = {} s in {tight} of {} attempts",
            min_gap,
            too_few + tight
        )
    } else {
        format!(
            "fewer than {n} packets inside the t_max = {} s window in {too_few} of {} attempts",
            window.t_max,
            too_few + tight
        )
    };
    Err(Error::InfeasibleWindow(reason))
}

/// Draws `packets_per_band[q]` TOAs for every band independently: a random
/// window start, then a uniform draw without replacement among the recorded
/// TOAs inside `[start, start + t_max]`.
pub fn select_toas<R: Rng + ?Sized>(
    trace: &TrafficTrace,
    packets_per_band: &[usize],
    window: &SamplingWindow,
    max_retries: usize,
    rng: &mut R,
) -> Result<ToaSelection> {
    if packets_per_band.is_empty() {
        return Err(Error::invalid("at least one band is required"));
    }
    if let Some(&n) = packets_per_band.iter().find(|&&n| n < 2) {
        return Err(Error::invalid(format!("each band needs >= 2 packets, got {n}")));
    }
    let per_band = packets_per_band
        .iter()
        .map(|&n| select_band(trace, n, window, max_retries, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ToaSelection { per_band })
}

/// Like [`select_toas`] but every band observes the same packet times.
pub fn select_toas_shared<R: Rng + ?Sized>(
    trace: &TrafficTrace,
    packets_per_band: &[usize],
    window: &SamplingWindow,
    max_retries: usize,
    rng: &mut R,
) -> Result<ToaSelection> {
    let n = *packets_per_band
        .first()
        .ok_or_else(|| Error::invalid("at least one band is required"))?;
    if packets_per_band.iter().any(|&m| m != n) {
        return Err(Error::invalid(
            "shared timing requires the same packet count in every band",
        ));
    }
    if n < 2 {
        return Err(Error::invalid(format!("each band needs >= 2 packets, got {n}")));
    }
    let toas = select_band(trace, n, window, max_retries, rng)?;
    Ok(ToaSelection {
        per_band: vec![toas; packets_per_band.len()],
    })
}

/// True iff the two earliest band-0 packets are strictly closer than `bound`.
pub fn validate_anchor(selection: &ToaSelection, bound: f64) -> bool {
    selection.anchor_tdoa() < bound
}

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::{GroupKey, Method};

/// Five-number box summary of relative errors within one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub f2_ghz: f64,
    pub noise_deg: f64,
    pub t_max_ms: f64,
    pub packets: usize,
    pub beta1: f64,
    pub method: Method,
    pub count: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
}

impl BoxplotStats {
    pub fn key(&self) -> GroupKey {
        GroupKey {
            f2_ghz: self.f2_ghz,
            noise_deg: self.noise_deg,
            t_max_ms: self.t_max_ms,
            packets: self.packets,
            beta1: self.beta1,
        }
    }
}

/// One estimate of one trial, flattened the way `trials.csv` stores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub config_hash: String,
    pub f2_ghz: f64,
    pub noise_deg: f64,
    pub t_max_ms: f64,
    pub packets: usize,
    pub beta1: f64,
    pub trial_index: u64,
    pub method: Method,
    pub v_true: f64,
    pub v_hat: f64,
    pub rel_error: f64,
    pub anchor_tdoa: f64,
    pub resample_count: usize,
}

impl TrialRow {
    pub fn key(&self) -> GroupKey {
        GroupKey {
            f2_ghz: self.f2_ghz,
            noise_deg: self.noise_deg,
            t_max_ms: self.t_max_ms,
            packets: self.packets,
            beta1: self.beta1,
        }
    }
}

/// Linear-interpolation quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box statistics with whiskers at the most extreme data inside
/// `1.5 * IQR` of the quartiles. Returns `None` for an empty sample.
pub fn box_summary(values: &[f64]) -> Option<(f64, f64, f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let med = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let lw = v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(q1).min(q1);
    let uw = v.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(q3).max(q3);
    Some((lw, q1, med, q3, uw))
}

/// Groups rows by figure axes and method, in order of first appearance.
pub fn summarize(rows: &[TrialRow]) -> Vec<BoxplotStats> {
    let mut groups: Vec<(GroupKey, Method, Vec<f64>)> = Vec::new();
    for row in rows {
        let key = row.key();
        match groups
            .iter_mut()
            .find(|(k, m, _)| k.bits() == key.bits() && *m == row.method)
        {
            Some((_, _, vals)) => vals.push(row.rel_error),
            None => groups.push((key, row.method, vec![row.rel_error])),
        }
    }
    groups
        .into_iter()
        .filter_map(|(key, method, vals)| {
            let Some((lw, q1, med, q3, uw)) = box_summary(&vals) else {
                warn!("skipping empty group {key:?} / {method}");
                return None;
            };
            Some(BoxplotStats {
                f2_ghz: key.f2_ghz,
                noise_deg: key.noise_deg,
                t_max_ms: key.t_max_ms,
                packets: key.packets,
                beta1: key.beta1,
                method,
                count: vals.len(),
                median: med,
                lower_quartile: q1,
                upper_quartile: q3,
                lower_whisker: lw,
                upper_whisker: uw,
            })
        })
        .collect()
}

/// Median of an unsorted sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

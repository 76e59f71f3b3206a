//! Physical constants, carrier bands and the closed-form Doppler relations
//! shared by every other module.
//!
//! Conventions used throughout the crate:
//! - a TDOA is always `later - earlier > 0`,
//! - a measured phase difference is `psi_later - psi_earlier`, wrapped to `[0, 2pi)`,
//! - the accumulated phase over a TDOA is `4 pi v f dt / c`, positive for a
//!   positive radial velocity `v`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A carrier frequency and bandwidth, both in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    carrier_freq: f64,
    bandwidth: f64,
}

impl Band {
    pub fn new(carrier_freq: f64, bandwidth: f64) -> Result<Self> {
        if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
            return Err(Error::invalid(format!(
                "carrier frequency must be positive, got {carrier_freq}"
            )));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0 && bandwidth < carrier_freq) {
            return Err(Error::invalid(format!(
                "bandwidth must lie in (0, carrier), got {bandwidth} for carrier {carrier_freq}"
            )));
        }
        Ok(Self {
            carrier_freq,
            bandwidth,
        })
    }

    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Delay resolution `1 / B`.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// Velocity-to-phase coefficient `4 pi f dt / c` for a given TDOA, in rad per m/s.
    pub fn phase_coefficient(&self, tdoa: f64) -> f64 {
        4.0 * PI * self.carrier_freq * tdoa / SPEED_OF_LIGHT
    }
}

/// Bands sorted by ascending carrier; index 0 is the anchor band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    bands: Vec<Band>,
}

impl BandSet {
    /// Sorts the bands by carrier frequency. Rejects an empty set and
    /// duplicate carriers.
    pub fn new(mut bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::invalid("a band set needs at least one band"));
        }
        bands.sort_by(|a, b| a.carrier_freq.total_cmp(&b.carrier_freq));
        if bands
            .windows(2)
            .any(|w| w[0].carrier_freq == w[1].carrier_freq)
        {
            return Err(Error::invalid("carrier frequencies must be distinct"));
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn anchor(&self) -> &Band {
        &self.bands[0]
    }

    pub fn get(&self, index: usize) -> Option<&Band> {
        self.bands.get(index)
    }
}

/// Speed and aspect angle of a scattering point; the radial velocity is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    speed: f64,
    aspect_angle: f64,
}

impl KinematicState {
    pub fn new(speed: f64, aspect_angle: f64) -> Result<Self> {
        if !(speed.is_finite() && speed >= 0.0) || !aspect_angle.is_finite() {
            return Err(Error::invalid(format!(
                "speed must be finite and non-negative and angle finite, got ({speed}, {aspect_angle})"
            )));
        }
        Ok(Self {
            speed,
            aspect_angle,
        })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn aspect_angle(&self) -> f64 {
        self.aspect_angle
    }

    pub fn radial_velocity(&self) -> f64 {
        self.speed * self.aspect_angle.cos()
    }
}

/// Doppler shift `2 v f / c` in Hz.
pub fn doppler_frequency(radial_velocity: f64, band: &Band) -> f64 {
    2.0 * radial_velocity * band.carrier_freq / SPEED_OF_LIGHT
}

/// Largest velocity observable without aliasing at a constant inter-packet
/// interval: `c / (4 f dT)`.
pub fn max_unambiguous_velocity(band: &Band, inter_packet: f64) -> Result<f64> {
    if !(inter_packet.is_finite() && inter_packet > 0.0) {
        return Err(Error::invalid(format!(
            "inter-packet interval must be positive, got {inter_packet}"
        )));
    }
    Ok(SPEED_OF_LIGHT / (4.0 * band.carrier_freq * inter_packet))
}

/// Velocity resolution of a uniformly sampled burst: `c / (2 f N dT)`.
pub fn velocity_resolution(band: &Band, num_packets: usize, inter_packet: f64) -> Result<f64> {
    if num_packets < 2 {
        return Err(Error::invalid(format!(
            "velocity resolution needs at least 2 packets, got {num_packets}"
        )));
    }
    if !(inter_packet.is_finite() && inter_packet > 0.0) {
        return Err(Error::invalid(format!(
            "inter-packet interval must be positive, got {inter_packet}"
        )));
    }
    Ok(SPEED_OF_LIGHT / (2.0 * band.carrier_freq * num_packets as f64 * inter_packet))
}

/// Largest anchor TDOA whose accumulated phase, plus a 3-sigma noise margin,
/// stays below pi for every velocity up to `v_max`:
/// `c (pi - 3 sigma) / (4 pi f v_max)`.
pub fn max_anchor_tdoa(anchor_band: &Band, v_max: f64, phase_noise_std: f64) -> Result<f64> {
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(Error::invalid(format!("v_max must be positive, got {v_max}")));
    }
    if !(phase_noise_std.is_finite() && phase_noise_std >= 0.0) {
        return Err(Error::invalid(format!(
            "phase noise std must be non-negative, got {phase_noise_std}"
        )));
    }
    let three_sigma = 3.0 * phase_noise_std;
    if three_sigma >= PI {
        return Err(Error::InfeasibleAnchor { three_sigma });
    }
    Ok(SPEED_OF_LIGHT * (PI - three_sigma) / (4.0 * PI * anchor_band.carrier_freq * v_max))
}

/// Number of unordered packet pairs, `N (N - 1) / 2`.
pub fn pair_count(num_packets: usize) -> usize {
    num_packets * num_packets.saturating_sub(1) / 2
}

/// Wraps a finite phase into `[0, 2pi)`.
pub fn wrap_phase(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("cannot wrap non-finite phase {theta}")));
    }
    Ok(wrap_to_tau(theta))
}

/// Infallible `[0, 2pi)` wrap for values already known to be finite.
pub(crate) fn wrap_to_tau(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Principal value in `[-pi, pi)`.
pub fn principal_phase(theta: f64) -> f64 {
    let w = wrap_to_tau(theta + PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

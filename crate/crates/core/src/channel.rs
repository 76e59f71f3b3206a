//! CIR peak synthesis for single- and multi-component targets, phase
//! extraction and measurement-noise injection.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{doppler_frequency, Band};

/// Floor applied to drawn band gains so a peak never vanishes exactly.
pub const MIN_BAND_GAIN: f64 = 1e-6;

/// Band-limited delay kernel `sin(pi B x) / (pi B x)`, exactly 1 at `x = 0`.
pub fn sinc_pulse(x: f64, bandwidth: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let arg = PI * bandwidth * x;
    arg.sin() / arg
}

/// One moving part of a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetComponent {
    scatter_coeff: f64,
    radial_velocity: f64,
    delay: f64,
}

impl TargetComponent {
    pub fn new(scatter_coeff: f64, radial_velocity: f64, delay: f64) -> Result<Self> {
        if !(scatter_coeff > 0.0 && scatter_coeff <= 1.0) {
            return Err(Error::invalid(format!(
                "scatter coefficient must lie in (0, 1], got {scatter_coeff}"
            )));
        }
        if !radial_velocity.is_finite() {
            return Err(Error::invalid("radial velocity must be finite"));
        }
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::invalid(format!("delay must be >= 0, got {delay}")));
        }
        Ok(Self {
            scatter_coeff,
            radial_velocity,
            delay,
        })
    }

    pub fn scatter_coeff(&self) -> f64 {
        self.scatter_coeff
    }

    pub fn radial_velocity(&self) -> f64 {
        self.radial_velocity
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }
}

/// Frequency-dependent gain `C ~ N(mean, std^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeModel {
    pub band_gain_mean: f64,
    pub band_gain_std: f64,
}

impl Default for AmplitudeModel {
    fn default() -> Self {
        Self {
            band_gain_mean: 1.0,
            band_gain_std: 0.05,
        }
    }
}

impl AmplitudeModel {
    /// A model whose gains are always exactly `1`.
    pub fn unit() -> Self {
        Self {
            band_gain_mean: 1.0,
            band_gain_std: 0.0,
        }
    }

    pub fn draw_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.band_gain_mean + self.band_gain_std * z).max(MIN_BAND_GAIN)
    }
}

/// Where measurement noise enters the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Zero-mean Gaussian added to each extracted phase, std in radians.
    PhaseDomain { phase_std: f64 },
    /// Circular complex Gaussian added to the CIR peak; `cir_std` is the
    /// per-quadrature standard deviation.
    CirDomain { cir_std: f64 },
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::PhaseDomain { phase_std: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let std = match *self {
            NoiseModel::PhaseDomain { phase_std } => phase_std,
            NoiseModel::CirDomain { cir_std } => cir_std,
        };
        if std.is_finite() && std >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("noise std must be >= 0, got {std}")))
        }
    }
}

/// The target as seen in one band: each component paired with its gain
/// `C_{m,q}`, drawn once and held for the whole coherent interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BandResponse {
    band: Band,
    components: Vec<(TargetComponent, f64)>,
}

impl BandResponse {
    pub fn draw<R: Rng + ?Sized>(
        components: &[TargetComponent],
        band: Band,
        amp_model: &AmplitudeModel,
        rng: &mut R,
    ) -> Result<Self> {
        let gains = components.iter().map(|_| amp_model.draw_gain(rng)).collect();
        Self::with_gains(components, band, gains)
    }

    pub fn with_gains(components: &[TargetComponent], band: Band, gains: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a target needs at least one component"));
        }
        if gains.len() != components.len() {
            return Err(Error::invalid(format!(
                "{} gains for {} components",
                gains.len(),
                components.len()
            )));
        }
        Ok(Self {
            band,
            components: components.iter().copied().zip(gains).collect(),
        })
    }

    pub fn band(&self) -> &Band {
        &self.band
    }

    pub fn components(&self) -> &[(TargetComponent, f64)] {
        &self.components
    }

    fn clean_response(&self, t: f64, tau: Option<f64>) -> Complex64 {
        self.components
            .iter()
            .map(|(c, gain)| {
                let fd = doppler_frequency(c.radial_velocity, &self.band);
                let kernel = match tau {
                    Some(tau) => sinc_pulse(tau - c.delay, self.band.bandwidth()),
                    None => 1.0,
                };
                Complex64::from_polar(c.scatter_coeff * gain * kernel, TAU * fd * t)
            })
            .sum()
    }

    fn cir_noise<R: Rng + ?Sized>(noise: &NoiseModel, rng: &mut R) -> Complex64 {
        match *noise {
            NoiseModel::CirDomain { cir_std } if cir_std > 0.0 => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(cir_std * re, cir_std * im)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// CIR value at the target's peak delay bin (kernel evaluated at zero
    /// offset for every component). Phase-domain noise is not applied here.
    pub fn synth_peak_value<R: Rng + ?Sized>(
        &self,
        t: f64,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Complex64 {
        self.clean_response(t, None) + Self::cir_noise(noise, rng)
    }

    /// CIR value at an arbitrary fast-time delay `tau`.
    pub fn synth_cir<R: Rng + ?Sized>(
        &self,
        t: f64,
        tau: f64,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Complex64 {
        self.clean_response(t, Some(tau)) + Self::cir_noise(noise, rng)
    }
}

/// Convenience wrapper drawing gains and evaluating the peak in one call.
pub fn synth_peak_value<R: Rng + ?Sized>(
    components: &[TargetComponent],
    band: &Band,
    t: f64,
    amp_model: &AmplitudeModel,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Complex64> {
    let response = BandResponse::draw(components, *band, amp_model, rng)?;
    Ok(response.synth_peak_value(t, noise, rng))
}

/// Instantaneous phase `atan2(Im, Re)` in `(-pi, pi]`.
pub fn extract_phase(sample: Complex64) -> Result<f64> {
    if sample.norm_sqr() == 0.0 || !sample.is_finite() {
        return Err(Error::DegenerateSample);
    }
    let psi = sample.im.atan2(sample.re);
    Ok(if psi == -PI { PI } else { psi })
}

pub fn add_phase_noise<R: Rng + ?Sized>(psi: f64, noise: &NoiseModel, rng: &mut R) -> Result<f64> {
    match *noise {
        NoiseModel::PhaseDomain { phase_std } => {
            if phase_std == 0.0 {
                return Ok(psi);
            }
            let z: f64 = rng.sample(StandardNormal);
            Ok(psi + phase_std * z)
        }
        NoiseModel::CirDomain { .. } => Err(Error::InvalidState(
            "phase noise requested while the CIR-domain noise model is active".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn band(f: f64) -> Band {
        Band::new(f, 160e6).unwrap()
    }

    fn single(v: f64, beta: f64) -> BandResponse {
        let c = TargetComponent::new(beta, v, 0.0).unwrap();
        BandResponse::with_gains(&[c], band(2.4e9), vec![1.0]).unwrap()
    }

    #[test]
    fn sinc_examples() {
        let b = 20e6;
        assert_eq!(sinc_pulse(0.0, b), 1.0);
        assert!(sinc_pulse(1.0 / b, b).abs() < 1e-15);
        assert!((sinc_pulse(0.5 / b, b) - 2.0 / PI).abs() < 1e-15);
        for i in -50..50 {
            assert!(sinc_pulse(i as f64 * 1.3e-9, b).abs() <= 1.0);
        }
    }

    #[test]
    fn peak_examples() {
        let mut r = rng();
        let noise = NoiseModel::noiseless();
        let z = single(0.0, 1.0).synth_peak_value(0.123, &noise, &mut r);
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let z = single(10.0, 1.0).synth_peak_value(1e-3, &noise, &mut r);
        let expected = TAU * doppler_frequency(10.0, &band(2.4e9)) * 1e-3;
        assert!((extract_phase(z).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.00531).abs() < 2e-3);
        assert!((z.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn opposite_velocities_give_real_sum() {
        let b = band(2.4e9);
        let v = 10.0;
        // phases +-pi/2 at t = 1 / (4 f_D)
        let t = 1.0 / (4.0 * doppler_frequency(v, &b));
        let comps = [
            TargetComponent::new(0.5, v, 0.0).unwrap(),
            TargetComponent::new(0.5, -v, 0.0).unwrap(),
        ];
        let resp = BandResponse::with_gains(&comps, b, vec![1.0, 1.0]).unwrap();
        let z = resp.synth_peak_value(t, &NoiseModel::noiseless(), &mut rng());
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn empty_components_rejected() {
        let r = BandResponse::draw(&[], band(5e9), &AmplitudeModel::default(), &mut rng());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn peak_is_sum_of_components() {
        let b = band(5e9);
        let comps = [
            TargetComponent::new(0.7, 12.0, 0.0).unwrap(),
            TargetComponent::new(0.3, -31.0, 0.0).unwrap(),
        ];
        let both = BandResponse::with_gains(&comps, b, vec![1.02, 0.97]).unwrap();
        let first = BandResponse::with_gains(&comps[..1], b, vec![1.02]).unwrap();
        let second = BandResponse::with_gains(&comps[1..], b, vec![0.97]).unwrap();
        let noise = NoiseModel::noiseless();
        let mut r = rng();
        for &t in &[0.0, 1e-4, 3.3e-3, 0.05] {
            let sum =
                first.synth_peak_value(t, &noise, &mut r) + second.synth_peak_value(t, &noise, &mut r);
            assert!((both.synth_peak_value(t, &noise, &mut r) - sum).norm() < 1e-12);
        }
    }

    #[test]
    fn magnitude_is_time_invariant() {
        let c = TargetComponent::new(0.4, -17.0, 0.0).unwrap();
        let resp = BandResponse::with_gains(&[c], band(28e9), vec![1.03]).unwrap();
        let mut r = rng();
        for k in 0..20 {
            let z = resp.synth_peak_value(k as f64 * 7.1e-4, &NoiseModel::noiseless(), &mut r);
            assert!((z.norm() - 0.4 * 1.03).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_phase_is_linear_in_time() {
        let v = 23.0;
        let resp = single(v, 0.9);
        let fd = doppler_frequency(v, resp.band());
        let noise = NoiseModel::noiseless();
        let mut r = rng();
        let t1 = 2e-3;
        for &dt in &[1e-5, 1e-4, 1e-3] {
            let dphi_expected = TAU * fd * dt;
            assert!(dphi_expected.abs() < PI);
            let a = extract_phase(resp.synth_peak_value(t1, &noise, &mut r)).unwrap();
            let b = extract_phase(resp.synth_peak_value(t1 + dt, &noise, &mut r)).unwrap();
            let d = crate::model::principal_phase(b - a);
            assert!((d - dphi_expected).abs() < 1e-9);
        }
    }

    #[test]
    fn sinc_mode_matches_peak_at_component_delay() {
        let c = TargetComponent::new(1.0, 5.0, 40e-9).unwrap();
        let resp = BandResponse::with_gains(&[c], band(5e9), vec![1.0]).unwrap();
        let noise = NoiseModel::noiseless();
        let mut r = rng();
        let a = resp.synth_cir(1e-3, 40e-9, &noise, &mut r);
        let b = resp.synth_peak_value(1e-3, &noise, &mut r);
        assert!((a - b).norm() < 1e-15);
        let off = resp.synth_cir(1e-3, 40e-9 + 1.0 / 160e6, &noise, &mut r);
        assert!(off.norm() < 1e-12);
    }

    #[test]
    fn phase_extraction_examples() {
        assert_eq!(extract_phase(Complex64::new(1.0, 0.0)).unwrap(), 0.0);
        assert!((extract_phase(Complex64::new(0.0, 1.0)).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((extract_phase(Complex64::new(-1.0, -1.0)).unwrap() + 0.75 * PI).abs() < 1e-15);
        assert_eq!(extract_phase(Complex64::new(-1.0, -0.0)).unwrap(), PI);
        assert!(matches!(
            extract_phase(Complex64::new(0.0, 0.0)),
            Err(Error::DegenerateSample)
        ));
    }

    #[test]
    fn phase_noise_identity_and_wrong_kind() {
        let mut r = rng();
        let n = NoiseModel::PhaseDomain { phase_std: 0.0 };
        assert_eq!(add_phase_noise(1.25, &n, &mut r).unwrap(), 1.25);
        let cir = NoiseModel::CirDomain { cir_std: 0.1 };
        assert!(matches!(
            add_phase_noise(1.0, &cir, &mut r),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn phase_noise_statistics() {
        let mut r = rng();
        let n = 100_000;
        let sigma10 = 10f64.to_radians();
        let noise = NoiseModel::PhaseDomain { phase_std: sigma10 };
        let mean = (0..n)
            .map(|_| add_phase_noise(1.0, &noise, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * sigma10 / (n as f64).sqrt());

        let sigma20 = 20f64.to_radians();
        let noise = NoiseModel::PhaseDomain { phase_std: sigma20 };
        let draws: Vec<f64> = (0..n)
            .map(|_| add_phase_noise(0.0, &noise, &mut r).unwrap())
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 0.349).abs() / 0.349 < 0.02);
    }

    #[test]
    fn cir_noise_linearizes_to_phase_noise() {
        let mut r = rng();
        let resp = single(0.0, 1.0);
        for &sw in &[0.01, 0.05] {
            let noise = NoiseModel::CirDomain { cir_std: sw };
            let n = 100_000;
            let phases: Vec<f64> = (0..n)
                .map(|_| extract_phase(resp.synth_peak_value(0.0, &noise, &mut r)).unwrap())
                .collect();
            let m = phases.iter().sum::<f64>() / n as f64;
            let sd =
                (phases.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            assert!((sd - sw).abs() / sw < 0.10, "sw={sw} sd={sd}");
        }
    }

    #[test]
    fn gain_floor() {
        let model = AmplitudeModel {
            band_gain_mean: -5.0,
            band_gain_std: 0.0,
        };
        assert_eq!(model.draw_gain(&mut rng()), MIN_BAND_GAIN);
    }
}

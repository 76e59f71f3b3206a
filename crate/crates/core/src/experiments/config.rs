use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::ImlOptions;
use crate::channel::AmplitudeModel;
use crate::error::{Error, Result};
use crate::model::{max_anchor_tdoa, Band, BandSet};
use crate::solver::SolverKind;
use crate::traffic::{SamplingWindow, DEFAULT_SELECT_RETRIES, DEFAULT_T_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Multiband,
    Iml,
    Singleband,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Multiband, Method::Iml, Method::Singleband];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Multiband => "multiband",
            Method::Iml => "iml",
            Method::Singleband => "singleband",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "multiband" => Ok(Method::Multiband),
            "iml" => Ok(Method::Iml),
            "singleband" | "single-band" => Ok(Method::Singleband),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.dedup();
    Ok(out)
}

/// Where packet arrival times come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrafficSpec {
    Poisson { rate: f64, duration: f64 },
    UniformGrid { step: f64, duration: f64 },
    Trace { path: PathBuf },
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec::Poisson {
            rate: 10_000.0,
            duration: 10.0,
        }
    }
}

impl TrafficSpec {
    /// Parses `poisson:RATE[:DURATION]` or `grid:STEP[:DURATION]`.
    pub fn parse_synthetic(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {t:?} in traffic spec {s:?}")))
        };
        let duration = match parts.get(2) {
            Some(d) => num(d)?,
            None => 10.0,
        };
        match (parts.first().copied(), parts.get(1)) {
            (Some("poisson"), Some(r)) if parts.len() <= 3 => Ok(TrafficSpec::Poisson {
                rate: num(r)?,
                duration,
            }),
            (Some("grid"), Some(st)) if parts.len() <= 3 => Ok(TrafficSpec::UniformGrid {
                step: num(st)?,
                duration,
            }),
            _ => Err(Error::Config(format!(
                "traffic spec {s:?} is not poisson:RATE[:DURATION] or grid:STEP[:DURATION]"
            ))),
        }
    }
}

/// Velocity of one scatterer: drawn per trial unless fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    /// Normalized scattering coefficient; shares sum to 1.
    pub share: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDomain {
    Phase,
    Cir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Carrier frequencies in Hz, any order.
    pub carriers: Vec<f64>,
    pub bandwidth: f64,
    /// Packets per band, in ascending-carrier order. A single entry applies to
    /// every band.
    pub packets: Vec<usize>,
    /// Per-packet noise std: degrees of phase, or the per-quadrature CIR std
    /// when `noise_domain = "cir"`.
    pub noise_deg: f64,
    pub noise_domain: NoiseDomain,
    pub t_min: f64,
    pub t_max: f64,
    pub trials: usize,
    pub seed: u64,
    pub velocity_range: [f64; 2],
    /// Draws with smaller magnitude are redrawn.
    pub min_abs_velocity: f64,
    /// Minimum distance between component velocities, m/s.
    pub component_separation: f64,
    pub components: Vec<ComponentSpec>,
    pub methods: Vec<Method>,
    pub traffic: TrafficSpec,
    /// All bands see the same packet times.
    pub shared_timing: bool,
    pub v_search: f64,
    pub solver: SolverKind,
    pub select_retries: usize,
    pub anchor_retries: usize,
    pub amplitude: AmplitudeModel,
    pub iml: ImlOptions,
    /// Phase std assumed by IML when the configured noise is zero, radians.
    pub iml_sigma_floor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            carriers: vec![2.4e9, 60e9],
            bandwidth: 20e6,
            packets: vec![4],
            noise_deg: 10.0,
            noise_domain: NoiseDomain::Phase,
            t_min: DEFAULT_T_MIN,
            t_max: 57e-3,
            trials: 1000,
            seed: 42,
            velocity_range: [-50.0, 50.0],
            min_abs_velocity: 0.5,
            component_separation: 1.0,
            components: vec![ComponentSpec {
                share: 1.0,
                velocity: None,
            }],
            methods: vec![Method::Multiband],
            traffic: TrafficSpec::default(),
            shared_timing: false,
            v_search: 60.0,
            solver: SolverKind::Exact,
            select_retries: DEFAULT_SELECT_RETRIES,
            anchor_retries: 10_000,
            amplitude: AmplitudeModel::default(),
            iml: ImlOptions::default(),
            iml_sigma_floor: 1f64.to_radians(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn band_set(&self) -> Result<BandSet> {
        let bands = self
            .carriers
            .iter()
            .map(|&f| Band::new(f, self.bandwidth))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        BandSet::new(bands).map_err(|e| Error::Config(e.to_string()))
    }

    /// Packet count of every band in ascending-carrier order.
    pub fn packets_per_band(&self) -> Vec<usize> {
        if self.packets.len() == 1 {
            vec![self.packets[0]; self.carriers.len()]
        } else {
            self.packets.clone()
        }
    }

    pub fn window(&self) -> Result<SamplingWindow> {
        SamplingWindow::new(self.t_min, self.t_max).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn noise_std(&self) -> f64 {
        match self.noise_domain {
            NoiseDomain::Phase => self.noise_deg.to_radians(),
            NoiseDomain::Cir => self.noise_deg,
        }
    }

    /// Largest speed the anchor must stay unambiguous for.
    pub fn v_max(&self) -> f64 {
        self.velocity_range[0].abs().max(self.velocity_range[1].abs())
    }

    /// Anchor TDOA bound used for selection, seconds.
    pub fn anchor_bound(&self) -> Result<f64> {
        let bands = self.band_set()?;
        max_anchor_tdoa(bands.anchor(), self.v_max(), self.noise_std())
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn highest_carrier(&self) -> f64 {
        self.carriers.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.band_set()?;
        let ppb = self.packets_per_band();
        if ppb.len() != self.carriers.len() {
            return fail(format!(
                "{} packet counts for {} carriers",
                self.packets.len(),
                self.carriers.len()
            ));
        }
        if ppb.iter().any(|&n| n < 2) {
            return fail("every band needs at least 2 packets".into());
        }
        if self.shared_timing && ppb.iter().any(|&n| n != ppb[0]) {
            return fail("shared timing needs equal packet counts".into());
        }
        if !(self.noise_deg.is_finite() && self.noise_deg >= 0.0) {
            return fail(format!("noise must be >= 0, got {}", self.noise_deg));
        }
        self.window()?;
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        let [lo, hi] = self.velocity_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return fail(format!("velocity range [{lo}, {hi}] is not ordered"));
        }
        if !(self.min_abs_velocity >= 0.0 && self.min_abs_velocity < hi.abs().max(lo.abs())) {
            return fail("min_abs_velocity leaves no admissible velocity".into());
        }
        if self.components.is_empty() {
            return fail("at least one component is required".into());
        }
        if self.components.iter().any(|c| !(c.share > 0.0 && c.share <= 1.0)) {
            return fail("component shares must lie in (0, 1]".into());
        }
        let total: f64 = self.components.iter().map(|c| c.share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("component shares sum to {total}, expected 1"));
        }
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        if !(self.v_search.is_finite() && self.v_search >= self.v_max()) {
            return fail(format!(
                "v_search ({}) must cover the velocity range ({})",
                self.v_search,
                self.v_max()
            ));
        }
        if let SolverKind::Grid { step } = self.solver {
            if !(step.is_finite() && step > 0.0) {
                return fail(format!("grid solver step must be positive, got {step}"));
            }
        }
        self.iml.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.iml_sigma_floor > 0.0) {
            return fail("iml_sigma_floor must be positive".into());
        }
        match &self.traffic {
            TrafficSpec::Poisson { rate, duration } if !(*rate > 0.0 && *duration > 0.0) => {
                return fail("poisson traffic needs positive rate and duration".into())
            }
            TrafficSpec::UniformGrid { step, duration } if !(*step > 0.0 && *duration > 0.0) => {
                return fail("grid traffic needs positive step and duration".into())
            }
            _ => {}
        }
        self.anchor_bound()?;
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Figure-axis values identifying this configuration in result files.
    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            f2_ghz: self.highest_carrier() / 1e9,
            noise_deg: self.noise_deg,
            t_max_ms: self.t_max * 1e3,
            packets: self.packets_per_band().into_iter().max().unwrap_or(0),
            beta1: self.components.first().map_or(1.0, |c| c.share),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub f2_ghz: f64,
    pub noise_deg: f64,
    pub t_max_ms: f64,
    pub packets: usize,
    pub beta1: f64,
}

impl GroupKey {
    pub(crate) fn bits(&self) -> (u64, u64, u64, usize, u64) {
        (
            self.f2_ghz.to_bits(),
            self.noise_deg.to_bits(),
            self.t_max_ms.to_bits(),
            self.packets,
            self.beta1.to_bits(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.packets_per_band(), vec![4, 4]);
        let bound = cfg.anchor_bound().unwrap();
        assert!(bound > 0.5e-3 && bound < 0.53e-3);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            methods: Method::ALL.to_vec(),
            noise_deg: 20.0,
            ..Default::default()
        };
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "carriers = [2.4e9, 5e9]\nnoise_deg = 20\nmethods = [\"multiband\", \"iml\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.carriers, vec![2.4e9, 5e9]);
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.methods, vec![Method::Multiband, Method::Iml]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "trials = 0",
            "velocity_range = [10.0, -10.0]",
            "unknown_key = 1",
            "packets = [1]",
            "noise_deg = 70",
            "methods = []",
            "t_min = 0.1\nt_max = 0.01",
            "v_search = 10",
            "components = [{ share = 0.6 }, { share = 0.6 }]",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn hash_changes_with_config() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            seed: 7,
            ..Default::default()
        };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn method_and_traffic_parsing() {
        assert_eq!(
            parse_methods("multiband,iml,singleband").unwrap(),
            Method::ALL.to_vec()
        );
        assert!(parse_methods("multiband,lasso").is_err());
        assert_eq!(
            TrafficSpec::parse_synthetic("poisson:1000").unwrap(),
            TrafficSpec::Poisson {
                rate: 1000.0,
                duration: 10.0
            }
        );
        assert_eq!(
            TrafficSpec::parse_synthetic("grid:1e-3:2").unwrap(),
            TrafficSpec::UniformGrid {
                step: 1e-3,
                duration: 2.0
            }
        );
        assert!(TrafficSpec::parse_synthetic("poisson").is_err());
        assert!(TrafficSpec::parse_synthetic("pareto:3").is_err());
    }

    #[test]
    fn group_key_follows_axes() {
        let cfg = ExperimentConfig {
            carriers: vec![5e9, 2.4e9],
            packets: vec![4, 12],
            components: vec![
                ComponentSpec {
                    share: 0.7,
                    velocity: None,
                },
                ComponentSpec {
                    share: 0.3,
                    velocity: None,
                },
            ],
            ..Default::default()
        };
        let k = cfg.group_key();
        assert_eq!(k.f2_ghz, 5.0);
        assert_eq!(k.packets, 12);
        assert_eq!(k.beta1, 0.7);
        assert!((k.t_max_ms - 57.0).abs() < 1e-12);
    }
}

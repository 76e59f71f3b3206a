//! Preset grids for the four result figures. Each preset expands a base
//! configuration into one configuration per box.

use log::info;

use super::config::{ComponentSpec, ExperimentConfig, Method};
use super::emit::RunOutput;
use super::run_experiment;
use crate::error::{Error, Result};

pub const SECOND_CARRIERS_GHZ: [f64; 5] = [5.0, 7.0, 14.0, 28.0, 60.0];
pub const WINDOWS_MS: [f64; 4] = [0.1, 1.0, 10.0, 57.0];
pub const NOISE_DEG: [f64; 2] = [10.0, 20.0];
pub const PACKET_COUNTS: [usize; 3] = [4, 8, 12];
pub const DOMINANT_SHARES: [f64; 4] = [0.9, 0.8, 0.7, 0.6];

const FIRST_CARRIER: f64 = 2.4e9;

fn with_f2(base: &ExperimentConfig, f2_ghz: f64) -> ExperimentConfig {
    ExperimentConfig {
        carriers: vec![FIRST_CARRIER, f2_ghz * 1e9],
        ..base.clone()
    }
}

/// Configurations of one figure, in output order.
///
/// * 2: window length x second carrier x noise, multiband only.
/// * 3: packets per band x second carrier x noise.
/// * 4: dominant component share x second carrier x noise, two components.
/// * 5: all three methods x second carrier x noise.
pub fn figure_configs(figure: u8, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    match figure {
        2 => {
            for &noise in &NOISE_DEG {
                for &t_max in &WINDOWS_MS {
                    for &f2 in &SECOND_CARRIERS_GHZ {
                        out.push(ExperimentConfig {
                            noise_deg: noise,
                            t_max: t_max * 1e-3,
                            packets: vec![4],
                            methods: vec![Method::Multiband],
                            ..with_f2(base, f2)
                        });
                    }
                }
            }
        }
        3 => {
            for &noise in &NOISE_DEG {
                for &n in &PACKET_COUNTS {
                    for &f2 in &SECOND_CARRIERS_GHZ {
                        out.push(ExperimentConfig {
                            noise_deg: noise,
                            t_max: 57e-3,
                            packets: vec![n],
                            methods: vec![Method::Multiband],
                            ..with_f2(base, f2)
                        });
                    }
                }
            }
        }
        4 => {
            for &noise in &NOISE_DEG {
                for &beta in &DOMINANT_SHARES {
                    for &f2 in &SECOND_CARRIERS_GHZ {
                        out.push(ExperimentConfig {
                            noise_deg: noise,
                            t_max: 57e-3,
                            packets: vec![4],
                            methods: vec![Method::Multiband],
                            components: vec![
                                ComponentSpec {
                                    share: beta,
                                    velocity: None,
                                },
                                ComponentSpec {
                                    share: 1.0 - beta,
                                    velocity: None,
                                },
                            ],
                            ..with_f2(base, f2)
                        });
                    }
                }
            }
        }
        5 => {
            for &noise in &NOISE_DEG {
                for &f2 in &SECOND_CARRIERS_GHZ {
                    out.push(ExperimentConfig {
                        noise_deg: noise,
                        t_max: 57e-3,
                        packets: vec![4],
                        methods: Method::ALL.to_vec(),
                        ..with_f2(base, f2)
                    });
                }
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown figure {other}; expected 2, 3, 4 or 5"
            )))
        }
    }
    for cfg in &out {
        cfg.validate()?;
    }
    Ok(out)
}

pub fn run_sweep(configs: &[ExperimentConfig]) -> Result<Vec<RunOutput>> {
    configs
        .iter()
        .enumerate()
        .map(|(k, cfg)| {
            info!(
                "sweep {}/{}: f2={} GHz noise={} deg t_max={} s packets={:?}",
                k + 1,
                configs.len(),
                cfg.highest_carrier() / 1e9,
                cfg.noise_deg,
                cfg.t_max,
                cfg.packets
            );
            Ok(RunOutput {
                config: cfg.clone(),
                records: run_experiment(cfg)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sizes() {
        let base = ExperimentConfig::default();
        assert_eq!(figure_configs(2, &base).unwrap().len(), 40);
        assert_eq!(figure_configs(3, &base).unwrap().len(), 30);
        assert_eq!(figure_configs(4, &base).unwrap().len(), 40);
        assert_eq!(figure_configs(5, &base).unwrap().len(), 10);
        assert!(figure_configs(1, &base).is_err());
    }

    #[test]
    fn presets_keep_base_settings() {
        let base = ExperimentConfig {
            trials: 7,
            seed: 99,
            ..Default::default()
        };
        for fig in 2..=5 {
            for cfg in figure_configs(fig, &base).unwrap() {
                assert_eq!(cfg.trials, 7);
                assert_eq!(cfg.seed, 99);
                assert_eq!(cfg.carriers[0], 2.4e9);
            }
        }
        let fig4 = figure_configs(4, &base).unwrap();
        assert!(fig4
            .iter()
            .all(|c| (c.components[0].share + c.components[1].share - 1.0).abs() < 1e-12));
    }
}

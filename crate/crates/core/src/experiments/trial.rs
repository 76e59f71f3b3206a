use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, NoiseDomain, TrafficSpec};
use crate::benchmarks::{solve_iml, solve_single_band};
use crate::channel::{add_phase_noise, extract_phase, BandResponse, NoiseModel, TargetComponent};
use crate::error::{Error, Result};
use crate::measurements::{build_system, pairwise_differences, MeasurementSystem};
use crate::model::BandSet;
use crate::solver::IlsProblem;
use crate::traffic::{
    gen_synthetic_trace, load_trace, select_toas, select_toas_shared, validate_anchor,
    SamplingWindow, TrafficModel, TrafficTrace,
};

/// Stream reserved for building the synthetic trace shared by every trial.
pub const TRACE_STREAM: u64 = u64::MAX;

/// Safety cap on velocity redraws per trial.
const MAX_VELOCITY_DRAWS: usize = 100_000;

/// Generator for one trial: the master seed selects the key, the trial index
/// selects the stream, so trials are independent of execution order.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEstimate {
    pub method: Method,
    pub v_hat: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub stream_id: u64,
    pub v_true: f64,
    pub estimates: Vec<MethodEstimate>,
    pub anchor_tdoa: f64,
    /// Selections discarded because the anchor pair was too far apart.
    pub resample_count: usize,
    pub velocity_redraws: usize,
}

impl TrialRecord {
    pub fn estimate(&self, method: Method) -> Option<&MethodEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }
}

pub fn rel_error(v_hat: f64, v_true: f64) -> f64 {
    (v_hat - v_true).abs() / v_true.abs()
}

/// Everything trials share: validated bands, window and the packet trace.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub config: ExperimentConfig,
    pub bands: BandSet,
    pub window: SamplingWindow,
    pub trace: TrafficTrace,
    pub anchor_bound: f64,
}

impl TrialContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let trace = match &config.traffic {
            TrafficSpec::Trace { path } => load_trace(path)?,
            TrafficSpec::Poisson { rate, duration } => gen_synthetic_trace(
                &TrafficModel::Poisson { rate: *rate },
                *duration,
                &mut trial_rng(config.seed, TRACE_STREAM),
            )?,
            TrafficSpec::UniformGrid { step, duration } => gen_synthetic_trace(
                &TrafficModel::UniformGrid { step: *step },
                *duration,
                &mut trial_rng(config.seed, TRACE_STREAM),
            )?,
        };
        Ok(Self {
            bands: config.band_set()?,
            window: config.window()?,
            anchor_bound: config.anchor_bound()?,
            config: config.clone(),
            trace,
        })
    }
}

fn draw_velocity<R: Rng>(cfg: &ExperimentConfig, avoid: &[f64], rng: &mut R) -> Result<(f64, usize)> {
    let [lo, hi] = cfg.velocity_range;
    for redraws in 0..MAX_VELOCITY_DRAWS {
        let v = rng.random_range(lo..hi);
        if v.abs() >= cfg.min_abs_velocity
            && avoid.iter().all(|a| (v - a).abs() >= cfg.component_separation)
        {
            return Ok((v, redraws));
        }
    }
    Err(Error::Config(format!(
        "no admissible velocity in [{lo}, {hi}] after {MAX_VELOCITY_DRAWS} draws"
    )))
}

/// Draws the velocities of every component; component 0 is the estimand.
fn draw_components<R: Rng>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<(Vec<TargetComponent>, usize)> {
    let mut velocities = Vec::with_capacity(cfg.components.len());
    let mut redraws = 0;
    for spec in &cfg.components {
        let v = match spec.velocity {
            Some(v) => v,
            None => {
                let (v, r) = draw_velocity(cfg, &velocities, rng)?;
                redraws += r;
                v
            }
        };
        velocities.push(v);
    }
    let components = cfg
        .components
        .iter()
        .zip(&velocities)
        .map(|(spec, &v)| TargetComponent::new(spec.share, v, 0.0))
        .collect::<Result<_>>()?;
    Ok((components, redraws))
}

/// Wrapped phase measurements of one trial before any estimator runs.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub v_true: f64,
    pub system: MeasurementSystem,
    pub anchor_tdoa: f64,
    pub resample_count: usize,
    pub velocity_redraws: usize,
}

/// Runs the synthesis half of a trial: velocities, timing, channel, phases.
pub fn synthesize_trial(ctx: &TrialContext, trial_index: u64) -> Result<TrialData> {
    let cfg = &ctx.config;
    let mut rng = trial_rng(cfg.seed, trial_index);
    let (components, velocity_redraws) = draw_components(cfg, &mut rng)?;
    let v_true = components[0].radial_velocity();

    let ppb = cfg.packets_per_band();
    let mut resample_count = 0;
    let selection = loop {
        let sel = if cfg.shared_timing {
            select_toas_shared(&ctx.trace, &ppb, &ctx.window, cfg.select_retries, &mut rng)?
        } else {
            select_toas(&ctx.trace, &ppb, &ctx.window, cfg.select_retries, &mut rng)?
        };
        if validate_anchor(&sel, ctx.anchor_bound) {
            break sel;
        }
        resample_count += 1;
        if resample_count > cfg.anchor_retries {
            return Err(Error::InfeasibleWindow(format!(
                "no selection with an anchor pair below {} s in {} attempts",
                ctx.anchor_bound, cfg.anchor_retries
            )));
        }
    };

    let noise = match cfg.noise_domain {
        NoiseDomain::Phase => NoiseModel::PhaseDomain {
            phase_std: cfg.noise_std(),
        },
        NoiseDomain::Cir => NoiseModel::CirDomain {
            cir_std: cfg.noise_std(),
        },
    };
    let mut pairs = Vec::with_capacity(ctx.bands.len());
    for (q, band) in ctx.bands.bands().iter().enumerate() {
        let response = BandResponse::draw(&components, *band, &cfg.amplitude, &mut rng)?;
        let toas = &selection.per_band()[q];
        let mut psis = Vec::with_capacity(toas.len());
        for &t in toas {
            let sample = response.synth_peak_value(t, &noise, &mut rng);
            let psi = extract_phase(sample)?;
            psis.push(match noise {
                NoiseModel::PhaseDomain { .. } => add_phase_noise(psi, &noise, &mut rng)?,
                NoiseModel::CirDomain { .. } => psi,
            });
        }
        pairs.push(pairwise_differences(&psis, toas, q)?);
    }
    let system = build_system(&selection, &pairs, &ctx.bands)?;
    Ok(TrialData {
        v_true,
        system,
        anchor_tdoa: selection.anchor_tdoa(),
        resample_count,
        velocity_redraws,
    })
}

/// Phase-difference std assumed by the likelihood benchmark: two independent
/// per-packet errors. With CIR-domain noise the per-packet phase std of a
/// unit-magnitude peak is approximately the quadrature std itself.
pub fn iml_sigma(cfg: &ExperimentConfig) -> f64 {
    (std::f64::consts::SQRT_2 * cfg.noise_std()).max(cfg.iml_sigma_floor)
}

pub fn run_trial_in(ctx: &TrialContext, trial_index: u64) -> Result<TrialRecord> {
    let cfg = &ctx.config;
    let data = synthesize_trial(ctx, trial_index)?;
    let mut estimates = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let v_hat = match method {
            Method::Multiband => {
                let problem = IlsProblem::new(data.system.clone(), cfg.v_search)?;
                cfg.solver.solve(&problem)?.v_hat
            }
            Method::Iml => solve_iml(&data.system, iml_sigma(cfg), &cfg.iml)?,
            Method::Singleband => {
                solve_single_band(&data.system, ctx.bands.len() - 1, cfg.v_search)?.v_hat
            }
        };
        estimates.push(MethodEstimate {
            method,
            v_hat,
            rel_error: rel_error(v_hat, data.v_true),
        });
    }
    debug!(
        "trial {trial_index}: v_true={} resamples={}",
        data.v_true, data.resample_count
    );
    Ok(TrialRecord {
        trial_index,
        stream_id: trial_index,
        v_true: data.v_true,
        estimates,
        anchor_tdoa: data.anchor_tdoa,
        resample_count: data.resample_count,
        velocity_redraws: data.velocity_redraws,
    })
}

/// One trial from scratch; prefer [`run_trial_in`] when running many.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    run_trial_in(&TrialContext::new(config)?, trial_index)
}

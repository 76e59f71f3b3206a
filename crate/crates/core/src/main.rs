use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use doppler_unwrap::experiments::config::{parse_methods, TrafficSpec};
use doppler_unwrap::experiments::sweep::{figure_configs, run_sweep};
use doppler_unwrap::experiments::{emit_results, run_experiment, verify, ExperimentConfig, RunOutput};
use doppler_unwrap::solver::SolverKind;
use doppler_unwrap::Error;

#[derive(Parser)]
#[command(name = "doppler-unwrap", version, about = "Multiband unambiguous Doppler velocity estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Monte-Carlo experiment.
    Run(RunArgs),
    /// Run the preset grid of one result figure.
    Sweep {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=5))]
        figure: u8,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Cross-check the exact solver against the brute-force oracles.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Second (highest) carrier frequency, Hz.
    #[arg(long)]
    f2: Option<f64>,
    #[arg(long)]
    noise_deg: Option<f64>,
    /// Window length, s.
    #[arg(long)]
    tmax: Option<f64>,
    /// Minimum gap between selected packets, s.
    #[arg(long)]
    tmin: Option<f64>,
    /// Packets per band.
    #[arg(long)]
    packets: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of multiband,iml,singleband.
    #[arg(long)]
    methods: Option<String>,
    /// Packet trace file, one timestamp in seconds per line.
    #[arg(long, conflicts_with = "traffic")]
    trace: Option<PathBuf>,
    /// Synthetic traffic, e.g. poisson:10000 or grid:1e-4.
    #[arg(long)]
    traffic: Option<String>,
    /// Velocity search half-width, m/s.
    #[arg(long)]
    v_search: Option<f64>,
    /// Replace the exact solver by a dense grid with this step, m/s.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(f2) = self.f2 {
            let last = cfg.carriers.len() - 1;
            let idx = (0..cfg.carriers.len())
                .max_by(|&a, &b| cfg.carriers[a].total_cmp(&cfg.carriers[b]))
                .unwrap_or(last);
            cfg.carriers[idx] = f2;
        }
        if let Some(v) = self.noise_deg {
            cfg.noise_deg = v;
        }
        if let Some(v) = self.tmax {
            cfg.t_max = v;
        }
        if let Some(v) = self.tmin {
            cfg.t_min = v;
        }
        if let Some(v) = self.packets {
            cfg.packets = vec![v];
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(m) = &self.methods {
            cfg.methods = parse_methods(m)?;
        }
        if let Some(path) = &self.trace {
            cfg.traffic = TrafficSpec::Trace { path: path.clone() };
        }
        if let Some(t) = &self.traffic {
            cfg.traffic = TrafficSpec::parse_synthetic(t)?;
        }
        if let Some(v) = self.v_search {
            cfg.v_search = v;
        }
        if let Some(step) = self.grid_step {
            cfg.solver = SolverKind::Grid { step };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::TooManyInfeasible { .. } => ExitCode::from(3),
        Error::Config(_) | Error::InfeasibleAnchor { .. } | Error::InvalidArgument(_) => {
            ExitCode::from(2)
        }
        Error::Io { .. } | Error::Parse { .. } | Error::InsufficientData(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let records = run_experiment(&cfg)?;
            let files = emit_results(&[RunOutput { config: cfg, records }], &args.out)?;
            info!("wrote {}", files.trials.display());
        }
        Command::Sweep { figure, common } => {
            let base = common.resolve()?;
            let configs = figure_configs(figure, &base)?;
            let runs = run_sweep(&configs)?;
            let files = emit_results(&runs, &common.out)?;
            info!("wrote {}", files.stats.display());
        }
        Command::Verify { seed } => {
            let outcomes = verify::run_suite(seed)?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            if outcomes.iter().any(|o| !o.passed()) {
                return Err(Error::InvalidState("oracle mismatch".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            exit_code(&e)
        }
    }
}

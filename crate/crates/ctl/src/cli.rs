//! `nlmimo` subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{ArgGroup, Args, Parser, Subcommand};
use nlmimo::detect::oracle::{all_shapes, check_shape};
use nlmimo::detect::DetectorKind;
use nlmimo::ra::thresholds::ThresholdMeta;
use nlmimo::ra::{calibrate_thresholds, config_hash, CalibrationOptions, McsThresholdTable, RaError};
use nlmimo::sim::{preset, run_experiment, Experiment, RaMode, SimConfig, SimError};
use thiserror::Error;

use crate::control::LiveConfig;
use crate::server::{ServeOptions, Service};

#[derive(Debug, Parser)]
#[command(name = "nlmimo", version, about = "Link-level MU-MIMO lab: detection and rate adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate per-MCS SNR thresholds on a 1x1 AWGN link.
    Calibrate(CalibrateArgs),
    /// Run batch experiments and write one CSV per arm.
    Run(RunArgs),
    /// Start the live simulation and its control service.
    Live(LiveArgs),
    /// Check the sphere decoder against exhaustive search.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory receiving the threshold table.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Frames per BLER probe.
    #[arg(long, default_value_t = 2000)]
    pub frames: usize,
    /// Bisection stops at this width, in dB.
    #[arg(long, default_value_t = 0.25)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["preset", "config"])))]
pub struct RunArgs {
    /// E1, E2 or E3.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON file with one configuration or an array of named arms.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Only run the named arms.
    #[arg(long)]
    pub arm: Vec<String>,
    /// Override every arm's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override frames per SNR point.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Directory with the threshold table; defaults to --out.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LiveArgs {
    /// Start from an arm of a preset (first arm unless --arm is given).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub arm: Option<String>,
    #[arg(long)]
    pub detector: Option<DetectorKind>,
    #[arg(long)]
    pub ra: Option<RaMode>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub rx: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "NLMIMO_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// Directory with the dashboard build.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub thresholds: PathBuf,
    /// Stop after this many seconds instead of waiting for Ctrl-C.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Random instances per shape.
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Compare hard decisions only.
    #[arg(long)]
    pub hard_only: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown preset {0:?}; expected E1, E2 or E3")]
    UnknownPreset(String),
    #[error("no arm named {0:?}")]
    UnknownArm(String),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ra(#[from] RaError),
    #[error("invalid live config ({code}): {msg}", code = .0.code(), msg = .0)]
    Config(nlmimo::sim::ConfigError),
    #[error("cannot start service: {0}")]
    Serve(std::io::Error),
    #[error("{0} of {1} shapes disagree with exhaustive search")]
    OracleMismatch(usize, usize),
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Calibrate(a) => calibrate(a),
        Command::Run(a) => run(a),
        Command::Live(a) => live(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let opts = CalibrationOptions {
        frames_per_probe: a.frames,
        resolution_db: a.resolution,
        ..CalibrationOptions::default()
    };
    let table = calibrate_thresholds(&opts, a.seed)?;
    let meta = ThresholdMeta {
        config_hash: config_hash(),
        seed: a.seed,
        frames_per_probe: opts.frames_per_probe,
        resolution_db: opts.resolution_db,
        target_bler: opts.target_bler,
    };
    table.save(&a.out, &meta)?;
    for (m, t) in table.as_slice().iter().enumerate() {
        println!("MCS {m}: {t:.3} dB");
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn read_experiment(path: &Path) -> Result<Experiment, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.into(),
        source,
    })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
    Experiment::from_json(name, &text).map_err(|source| CliError::Parse {
        path: path.into(),
        source,
    })
}

fn load_experiment(preset_name: Option<&str>, config: Option<&Path>) -> Result<Experiment, CliError> {
    match (preset_name, config) {
        (Some(p), _) => preset(p).ok_or_else(|| CliError::UnknownPreset(p.to_string())),
        (None, Some(path)) => read_experiment(path),
        (None, None) => unreachable!("clap requires a source"),
    }
}

/// Threshold table for adaptive runs; missing tables name `calibrate`.
fn load_thresholds(dir: &Path) -> Result<McsThresholdTable, CliError> {
    Ok(McsThresholdTable::load(dir)?.0)
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let exp = load_experiment(a.preset.as_deref(), a.config.as_deref())?;
    for name in &a.arm {
        if !exp.arms.iter().any(|arm| &arm.name == name) {
            return Err(CliError::UnknownArm(name.clone()));
        }
    }
    let thresholds_dir = a.thresholds.clone().unwrap_or_else(|| a.out.clone());
    let mut thresholds = None;
    for arm in exp.arms.iter().filter(|arm| a.arm.is_empty() || a.arm.contains(&arm.name)) {
        let mut cfg = arm.config.clone();
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        if let Some(f) = a.frames {
            cfg.frames_per_point = f;
        }
        cfg.validate().map_err(SimError::from)?;
        if cfg.ra_mode == RaMode::Adaptive && thresholds.is_none() {
            thresholds = Some(load_thresholds(&thresholds_dir)?);
        }
        let result = run_experiment(&cfg, thresholds.as_ref(), a.workers)?;
        let path = a.out.join(format!("{}_{}.csv", exp.name.to_lowercase(), arm.name));
        write_file(&path, &result.to_csv())?;
        println!("{}: {}", arm.name, path.display());
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let err = |source| CliError::Write { path: path.into(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(err)?;
    }
    fs::write(path, text).map_err(err)
}

/// Initial live parameters from the chosen source and overrides.
pub fn live_config(a: &LiveArgs) -> Result<LiveConfig, CliError> {
    let base: SimConfig = if a.preset.is_some() || a.config.is_some() {
        let exp = load_experiment(a.preset.as_deref(), a.config.as_deref())?;
        let arm = match &a.arm {
            Some(name) => exp.arms.iter().find(|arm| &arm.name == name).ok_or_else(|| CliError::UnknownArm(name.clone()))?,
            None => exp.arms.first().ok_or_else(|| CliError::UnknownArm(String::new()))?,
        };
        arm.config.clone()
    } else {
        SimConfig {
            n_rx: 4,
            n_users: 4,
            detector: DetectorKind::Nl,
            ra_mode: RaMode::Static(1),
            snr_sweep: vec![15.0],
            frames_per_point: 1,
            seed: nlmimo::sim::presets::DEFAULT_SEED,
            per_user_snr_offset_db: vec![],
            channel: Default::default(),
        }
    };
    let mut cfg = LiveConfig::from_sim(&base);
    if let Some(d) = a.detector {
        cfg.detector = d;
    }
    if let Some(m) = a.ra {
        cfg.ra_mode = m;
    }
    if let Some(n) = a.users {
        cfg.n_users = n;
        if !cfg.per_user_snr_offset_db.is_empty() {
            cfg.per_user_snr_offset_db.resize(n, 0.0);
        }
    }
    if let Some(n) = a.rx {
        cfg.n_rx = n;
    }
    if let Some(s) = a.snr {
        cfg.snr_db = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn live(a: LiveArgs) -> Result<(), CliError> {
    let cfg = live_config(&a)?;
    let thresholds = match load_thresholds(&a.thresholds) {
        Ok(t) => Some(t),
        Err(e) if cfg.ra_mode == RaMode::Adaptive => return Err(e),
        Err(_) => None,
    };
    let rt = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
    rt.block_on(async {
        let opts = ServeOptions {
            addr: Some(SocketAddr::new(a.bind, a.port)),
            assets: a.assets.clone(),
        };
        let service = Service::start(cfg, thresholds, opts).await.map_err(CliError::Serve)?;
        println!("listening on http://{}", service.addr);
        let _ = std::io::stdout().flush();
        match a.duration {
            Some(s) => tokio::time::sleep(Duration::from_secs_f64(s.max(0.0))).await,
            None => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
        tokio::task::block_in_place(|| service.shutdown());
        Ok(())
    })
}

fn oracle(a: OracleArgs) -> Result<(), CliError> {
    let shapes = all_shapes();
    let mut failed = 0;
    for shape in &shapes {
        let r = check_shape(*shape, a.instances, a.seed, !a.hard_only);
        println!(
            "{} streams x {} rx: {} instances, hard mismatches {}, soft mismatches {}, max LLR error {:.2e}, mean nodes {:.1}",
            shape.streams, shape.rx, r.instances, r.hard_mismatches, r.soft_mismatches, r.max_llr_error, r.mean_nodes
        );
        if !r.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::OracleMismatch(failed, shapes.len()));
    }
    println!("all {} shapes agree", shapes.len());
    Ok(())
}

//! Experiment runner behind the `covarlab` binary.
//!
//! Each subcommand loads its default [`config::ExperimentConfig`], applies
//! file and flag overrides, runs its checks and writes
//! `<out>/<command>/report.json` plus tables and witnesses beside it.

pub mod cache;
mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::MatrixCache;
use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Recorder, RunReport};

pub const DEFAULT_OUT: &str = "covarlab-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::Subcommand)]
pub enum Command {
    /// Locality, symplecticity and triviality of the relative Cauchy evolution.
    RceCheck,
    /// Symplectic pairing of the rce derivative against the stress-energy tensor.
    StressEnergyIdentity,
    /// Kinematic against dynamical local subspaces, net properties, additivity.
    DynlocReport,
    /// The one-field-two-field chain and the massive power class.
    SpassDemo,
    /// Functor, naturality, time-slice and covariance laws on the catalog.
    FunctorLaws,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::RceCheck, Command::StressEnergyIdentity, Command::DynlocReport, Command::SpassDemo, Command::FunctorLaws];

    pub fn name(self) -> &'static str {
        match self {
            Command::RceCheck => "rce-check",
            Command::StressEnergyIdentity => "stress-energy-identity",
            Command::DynlocReport => "dynloc-report",
            Command::SpassDemo => "spass-demo",
            Command::FunctorLaws => "functor-laws",
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub resolution_scale: usize,
    pub no_cache: bool,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Library(covarlab::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Library(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<covarlab::Error> for RunError {
    fn from(e: covarlab::Error) -> Self {
        RunError::Library(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

/// Loads, overrides and validates the configuration of `cmd`.
pub fn resolve_config(cmd: Command, opts: &Options) -> Result<ExperimentConfig, ConfigError> {
    let text = match &opts.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let mut cfg = config::load(cmd, text.as_deref())?;
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    if let Some(o) = &opts.out {
        cfg.out = Some(o.clone());
    }
    if opts.no_cache {
        cfg.cache = false;
    }
    cfg.validate(opts.resolution_scale)?;
    if cfg.jitter > 0.0 {
        let seed = cfg.seed.expect("validated");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = cfg.jitter;
        for p in &mut cfg.perturbations {
            p.bump.center[0] += rng.random_range(-j..=j);
            p.bump.center[1] += rng.random_range(-j..=j);
        }
    }
    Ok(cfg)
}

/// Runs one command. `Ok` carries the report whatever the verdicts;
/// errors are configuration, library or i/o failures.
pub fn run(cmd: Command, opts: &Options) -> Result<RunReport, RunError> {
    let cfg = resolve_config(cmd, opts)?;
    let root = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let cache = cfg.cache.then(|| MatrixCache::locate(root.join("cache")));
    let mut rec = Recorder::new(root.join(cmd.name()))?;
    let scale = opts.resolution_scale;
    match cmd {
        Command::RceCheck => commands::rce_check(&cfg, scale, cache.as_ref(), &mut rec)?,
        Command::StressEnergyIdentity => commands::stress_energy_identity(&cfg, scale, &mut rec)?,
        Command::DynlocReport => commands::dynloc_report(&cfg, scale, &mut rec)?,
        Command::SpassDemo => commands::spass_demo(&cfg, scale, &mut rec)?,
        Command::FunctorLaws => commands::functor_laws(&cfg, &mut rec)?,
    }
    Ok(rec.finish(cmd.name(), cfg.hash(), cfg.seed, scale)?)
}

/// 0 when every check passes, 1 on a failed check, 2 on any error.
pub fn exit_code(r: &Result<RunReport, RunError>) -> i32 {
    match r {
        Ok(rep) if rep.pass => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

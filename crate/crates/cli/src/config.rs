//! Experiment configuration: built-in defaults, overridden by a flat
//! `key = value` file, overridden in turn by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use xychain::{IntegratorConfig, Protocol, DEFAULT_FIT_WINDOW, DEFAULT_NOISE_LEVELS};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauGrid {
    pub min_ln: f64,
    pub max_ln: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub enabled: bool,
    pub count: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n_k: usize,
    pub tau_grid: TauGrid,
    pub w_list: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub trajectories: TrajectoryConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut w_list = vec![0.0];
        w_list.extend(DEFAULT_NOISE_LEVELS);
        Self {
            protocol: Protocol::Transverse,
            n_k: 500,
            tau_grid: TauGrid { min_ln: DEFAULT_FIT_WINDOW.0, max_ln: DEFAULT_FIT_WINDOW.1, count: 24 },
            w_list,
            integrator: IntegratorConfig::default(),
            trajectories: TrajectoryConfig { enabled: false, count: 10_000, dt: 2e-3, seed: 0 },
            output_dir: PathBuf::from("."),
        }
    }
}

/// Flags shared by every subcommand that runs the solver.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// transverse, multicritical or gapless (also 1, 2, 3).
    #[arg(long)]
    pub protocol: Option<Protocol>,
    /// Number of momentum modes on the midpoint grid.
    #[arg(long)]
    pub nk: Option<usize>,
    #[arg(long)]
    pub tau_ln_min: Option<f64>,
    #[arg(long)]
    pub tau_ln_max: Option<f64>,
    #[arg(long)]
    pub tau_ln_count: Option<usize>,
    /// Noise amplitude; repeat the flag for several values.
    #[arg(long = "w")]
    pub w: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative and absolute integrator tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{key} = {value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

/// Reads `key = value` lines; `#` and `;` start comments and `[section]` headers are ignored.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

impl ExperimentConfig {
    fn apply_file(&mut self, entries: &BTreeMap<String, String>) -> Result<(), CliError> {
        for (key, value) in entries {
            match key.as_str() {
                "protocol" => self.protocol = parse(key, value)?,
                "n_k" | "nk" => self.n_k = parse(key, value)?,
                "tau_ln_min" => self.tau_grid.min_ln = parse(key, value)?,
                "tau_ln_max" => self.tau_grid.max_ln = parse(key, value)?,
                "tau_ln_count" | "tau_count" => self.tau_grid.count = parse(key, value)?,
                "w" | "w_list" => self.w_list = parse_list(key, value)?,
                "tol" => {
                    let tol: f64 = parse(key, value)?;
                    self.integrator.rel_tol = tol;
                    self.integrator.abs_tol = tol;
                }
                "rel_tol" => self.integrator.rel_tol = parse(key, value)?,
                "abs_tol" => self.integrator.abs_tol = parse(key, value)?,
                "max_step" => self.integrator.max_step = parse(key, value)?,
                "seed" => self.trajectories.seed = parse(key, value)?,
                "trajectories" | "trajectories_enabled" => self.trajectories.enabled = parse(key, value)?,
                "trajectory_count" => self.trajectories.count = parse(key, value)?,
                "trajectory_dt" => self.trajectories.dt = parse(key, value)?,
                "out" | "output_dir" => self.output_dir = PathBuf::from(value),
                _ => return Err(CliError::Config(format!("unknown config key `{key}`"))),
            }
        }
        Ok(())
    }

    fn apply_flags(&mut self, args: &CommonArgs) {
        if let Some(p) = args.protocol {
            self.protocol = p;
        }
        if let Some(n) = args.nk {
            self.n_k = n;
        }
        if let Some(v) = args.tau_ln_min {
            self.tau_grid.min_ln = v;
        }
        if let Some(v) = args.tau_ln_max {
            self.tau_grid.max_ln = v;
        }
        if let Some(v) = args.tau_ln_count {
            self.tau_grid.count = v;
        }
        if !args.w.is_empty() {
            self.w_list = args.w.clone();
        }
        if let Some(out) = &args.out {
            self.output_dir = out.clone();
        }
        if let Some(seed) = args.seed {
            self.trajectories.seed = seed;
        }
        if let Some(tol) = args.tol {
            self.integrator.rel_tol = tol;
            self.integrator.abs_tol = tol;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_k < 1 {
            return Err(CliError::Config("n_k must be at least 1".into()));
        }
        if self.tau_grid.count < 3 {
            return Err(CliError::Config("the τ grid needs at least 3 points".into()));
        }
        if !(self.tau_grid.max_ln > self.tau_grid.min_ln) {
            return Err(CliError::Config("tau_ln_max must exceed tau_ln_min".into()));
        }
        if self.w_list.is_empty() || self.w_list.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(CliError::Config("W values must be finite and non-negative".into()));
        }
        if self.trajectories.count < 1 || !(self.trajectories.dt > 0.0) {
            return Err(CliError::Config("trajectory count and dt must be positive".into()));
        }
        self.integrator.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = &args.config {
            cfg.apply_file(&read_config_file(path)?)?;
        }
        cfg.apply_flags(args);
        cfg.validate()?;
        Ok(cfg)
    }
}

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use xychain::analysis::{
    fit_alpha, fit_alpha_vs_rate, fit_linear_rate, fit_power_law, noise_induced_defects, optimal_quench_time,
};
use xychain::evolve::{average_trajectories, evolve_master, trajectory_ensemble};
use xychain::lzmap::{lz_defect_estimate, lz_table};
use xychain::{
    defect_density, log_tau_grid, run_sweep, scan_excitations, Error, KGrid, NoiseConfig, Protocol, ProtocolSpec,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{
    ensure_dir, pk_path, read_sweep, write_json, write_lz_table, write_profile, write_sweep, SweepRow,
};

#[derive(Serialize)]
struct SweepMeta<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    rows: usize,
    wall_time_s: f64,
}

/// Runs the `(W, τ)` sweep one noise level at a time. If a level fails, the
/// rows finished so far go to `sweep.partial.csv` before the error is returned.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let start = Instant::now();
    ensure_dir(&cfg.output_dir)?;
    let grid = KGrid::midpoint(cfg.n_k)?;
    let taus = log_tau_grid(cfg.tau_grid.min_ln, cfg.tau_grid.max_ln, cfg.tau_grid.count)?;
    let mut rows = Vec::with_capacity(taus.len() * cfg.w_list.len());
    for &w in &cfg.w_list {
        match run_sweep(cfg.protocol, &taus, &[w], &grid, &cfg.integrator) {
            Ok(res) => rows.extend(res.taus.iter().zip(&res.n_matrix[0]).map(|(&tau, &n_w)| SweepRow {
                protocol: cfg.protocol,
                tau,
                w,
                n_w,
            })),
            Err(e) => {
                write_sweep(&cfg.output_dir.join("sweep.partial.csv"), &rows)?;
                return Err(e.into());
            }
        }
    }
    write_sweep(&cfg.output_dir.join("sweep.csv"), &rows)?;
    if cfg.trajectories.enabled {
        let w = cfg.w_list.iter().copied().fold(0.0, f64::max);
        let report = trajectory_check(cfg, 0.5, 20.0, w)?;
        write_json(&cfg.output_dir.join(format!("trajcheck_{}.json", cfg.protocol)), &report)?;
    }
    let meta = SweepMeta {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        rows: rows.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output_dir.join("sweep_meta.json"), &meta)?;
    Ok(rows)
}

pub fn cmd_pkscan(cfg: &ExperimentConfig, tau: f64) -> Result<(), CliError> {
    ensure_dir(&cfg.output_dir)?;
    let spec = ProtocolSpec::new(cfg.protocol, tau)?;
    let grid = KGrid::midpoint(cfg.n_k)?;
    for &w in &cfg.w_list {
        let profile = scan_excitations(&spec, &grid, NoiseConfig::new(w)?, &cfg.integrator)?;
        let path = pk_path(&cfg.output_dir, cfg.protocol, tau, w);
        write_profile(&path, &profile)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseLevelFit {
    pub w: f64,
    pub r: f64,
    pub r2: f64,
    pub tau_opt: Option<f64>,
    pub boundary_minimum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaReport {
    pub alpha_ln_w2: f64,
    pub alpha_ln_w: f64,
    pub alpha_ln_r: Option<f64>,
    pub r2: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolFit {
    pub protocol: Protocol,
    pub beta: f64,
    pub c: f64,
    pub r2: f64,
    pub noise: Vec<NoiseLevelFit>,
    pub alpha: Option<AlphaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub protocols: Vec<ProtocolFit>,
}

impl FitReport {
    pub fn boundary_minima(&self) -> usize {
        self.protocols.iter().flat_map(|p| &p.noise).filter(|n| n.boundary_minimum).count()
    }
}

fn fit_protocol(protocol: Protocol, rows: &[&SweepRow]) -> Result<ProtocolFit, CliError> {
    let mut by_w: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        by_w.entry(r.w.to_bits()).or_default().push((r.tau, r.n_w));
    }
    let series: Vec<(f64, Vec<f64>, Vec<f64>)> = by_w
        .into_iter()
        .map(|(bits, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (taus, ns) = pts.into_iter().unzip();
            (f64::from_bits(bits), taus, ns)
        })
        .collect();
    let (_, taus0, n0) = series
        .iter()
        .find(|(w, _, _)| *w == 0.0)
        .ok_or_else(|| CliError::Config(format!("{protocol}: no W = 0 rows to fit the noise-free exponent")))?;
    let window = (taus0[0].ln(), taus0[taus0.len() - 1].ln());
    let kz = fit_power_law(taus0, n0, window)?;

    let mut noise = Vec::new();
    for (w, taus, ns) in series.iter().filter(|(w, _, _)| *w > 0.0) {
        let rate = fit_linear_rate(taus, &noise_induced_defects(taus, ns, &kz)?)?;
        let (tau_opt, boundary_minimum) = match optimal_quench_time(taus, ns) {
            Ok(t) => (Some(t), false),
            Err(Error::BoundaryMinimum { .. }) => (None, true),
            Err(e) => return Err(e.into()),
        };
        noise.push(NoiseLevelFit { w: *w, r: rate.r, r2: rate.r2, tau_opt, boundary_minimum });
    }

    let interior: Vec<&NoiseLevelFit> = noise.iter().filter(|n| n.tau_opt.is_some()).collect();
    let alpha = if interior.len() >= 3 {
        let ws: Vec<f64> = interior.iter().map(|n| n.w).collect();
        let opts: Vec<f64> = interior.iter().filter_map(|n| n.tau_opt).collect();
        let rates: Vec<f64> = interior.iter().map(|n| n.r).collect();
        let fit = fit_alpha(&ws, &opts)?;
        Some(AlphaReport {
            alpha_ln_w2: fit.alpha,
            alpha_ln_w: fit.alpha_ln_w,
            alpha_ln_r: fit_alpha_vs_rate(&rates, &opts).ok().map(|f| f.slope),
            r2: fit.r2,
            n_points: ws.len(),
        })
    } else {
        None
    };
    Ok(ProtocolFit { protocol, beta: kz.beta, c: kz.c, r2: kz.r2, noise, alpha })
}

pub fn fit_rows(rows: &[SweepRow]) -> Result<FitReport, CliError> {
    let mut by_protocol: BTreeMap<Protocol, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_protocol.entry(r.protocol).or_default().push(r);
    }
    if by_protocol.is_empty() {
        return Err(CliError::Config("sweep file has no rows".into()));
    }
    let protocols = by_protocol
        .into_iter()
        .map(|(p, rs)| fit_protocol(p, &rs))
        .collect::<Result<_, _>>()?;
    Ok(FitReport { protocols })
}

/// Fits every protocol in the sweep file and writes `fit_report.json`.
/// Boundary minima are recorded in the report and then reported as an error.
pub fn cmd_fit(input: &Path, out_dir: &Path) -> Result<FitReport, CliError> {
    let report = fit_rows(&read_sweep(input)?)?;
    ensure_dir(out_dir)?;
    let text = write_json(&out_dir.join("fit_report.json"), &report)?;
    print!("{text}");
    let bad = report.boundary_minima();
    if bad > 0 {
        return Err(CliError::Numerical(Error::Fit(format!(
            "{bad} noise level(s) have their minimum on the τ grid boundary"
        ))));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LzSummary {
    pub protocol: Protocol,
    pub tau: f64,
    pub lz_estimate: f64,
    pub master_n0: f64,
}

pub fn cmd_lz(cfg: &ExperimentConfig, tau: f64) -> Result<LzSummary, CliError> {
    ensure_dir(&cfg.output_dir)?;
    let spec = ProtocolSpec::new(cfg.protocol, tau)?;
    let grid = KGrid::midpoint(cfg.n_k)?;
    write_lz_table(&cfg.output_dir.join(format!("lzmap_{}.csv", cfg.protocol)), &lz_table(&spec, &grid))?;
    let summary = LzSummary {
        protocol: cfg.protocol,
        tau,
        lz_estimate: lz_defect_estimate(&spec, &grid)?,
        master_n0: defect_density(&spec, &grid, NoiseConfig::noiseless(), &cfg.integrator)?,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub protocol: Protocol,
    pub k: f64,
    pub tau: f64,
    pub w: f64,
    pub count: usize,
    pub dt: f64,
    pub seed: u64,
    pub trace_distance: f64,
    pub stderr: f64,
}

fn trajectory_check(cfg: &ExperimentConfig, k: f64, tau: f64, w: f64) -> Result<TrajectoryReport, CliError> {
    let spec = ProtocolSpec::new(cfg.protocol, tau)?;
    let noise = NoiseConfig::new(w)?;
    let t = cfg.trajectories;
    let master = evolve_master(&spec, k, noise, &cfg.integrator)?;
    let states = trajectory_ensemble(&spec, k, noise, t.dt, t.seed, t.count)?;
    let (avg, stderr) = average_trajectories(&states)?;
    Ok(TrajectoryReport {
        protocol: cfg.protocol,
        k,
        tau,
        w,
        count: t.count,
        dt: t.dt,
        seed: t.seed,
        trace_distance: avg.trace_distance(&master),
        stderr,
    })
}

pub fn cmd_trajcheck(cfg: &ExperimentConfig, k: f64, tau: f64, w: f64) -> Result<TrajectoryReport, CliError> {
    ensure_dir(&cfg.output_dir)?;
    let report = trajectory_check(cfg, k, tau, w)?;
    let text = write_json(&cfg.output_dir.join(format!("trajcheck_{}.json", cfg.protocol)), &report)?;
    print!("{text}");
    Ok(report)
}

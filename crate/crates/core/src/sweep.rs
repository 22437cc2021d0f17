//! Parallel evaluation of `n_W(τ)` over a `(W, τ)` grid.
//!
//! Every `(W, τ, k)` triple is an independent task. Results are gathered in
//! task order before reduction, so the output does not depend on how rayon
//! schedules the work.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::NoiseConfig;
use crate::model::{KGrid, Protocol, ProtocolSpec};
use crate::observables::{mean, mode_excitation};
use crate::ode::IntegratorConfig;

/// `count` quench times log-spaced between `e^min_ln` and `e^max_ln`.
pub fn log_tau_grid(min_ln: f64, max_ln: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(max_ln > min_ln) || !min_ln.is_finite() || !max_ln.is_finite() {
        return Err(Error::domain(format!(
            "invalid ln τ grid [{min_ln}, {max_ln}] with {count} points"
        )));
    }
    let step = (max_ln - min_ln) / (count - 1) as f64;
    Ok((0..count).map(|i| (min_ln + step * i as f64).exp()).collect())
}

/// Defect densities for one protocol; `n_matrix[i][j]` belongs to `ws[i]`, `taus[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub taus: Vec<f64>,
    pub ws: Vec<f64>,
    pub n_matrix: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn row(&self, w: f64) -> Option<&[f64]> {
        self.ws.iter().position(|&x| x == w).map(|i| self.n_matrix[i].as_slice())
    }
}

pub fn run_sweep(
    protocol: Protocol,
    taus: &[f64],
    ws: &[f64],
    grid: &KGrid,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    let noises = ws.iter().map(|&w| NoiseConfig::new(w)).collect::<Result<Vec<_>>>()?;
    let specs = taus.iter().map(|&t| ProtocolSpec::new(protocol, t)).collect::<Result<Vec<_>>>()?;
    let nk = grid.n_modes();
    let per_w = taus.len() * nk;
    let p: Vec<f64> = (0..ws.len() * per_w)
        .into_par_iter()
        .map(|task| {
            let (iw, rest) = (task / per_w, task % per_w);
            let (it, ik) = (rest / nk, rest % nk);
            mode_excitation(&specs[it], grid.points()[ik], noises[iw], cfg)
        })
        .collect::<Result<_>>()?;
    let n_matrix = p
        .chunks(per_w)
        .map(|row| row.chunks(nk).map(mean).collect())
        .collect();
    Ok(SweepResult { protocol, taus: taus.to_vec(), ws: ws.to_vec(), n_matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::defect_density;

    #[test]
    fn tau_grid_is_log_spaced() {
        let g = log_tau_grid(3.0, 5.5, 24).unwrap();
        assert_eq!(g.len(), 24);
        assert!((g[0] - 3.0f64.exp()).abs() < 1e-12);
        assert!((g[23] - 5.5f64.exp()).abs() < 1e-9);
        let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12));
        assert!(log_tau_grid(3.0, 3.0, 10).is_err());
        assert!(log_tau_grid(3.0, 4.0, 1).is_err());
    }

    #[test]
    fn sweep_agrees_with_direct_defect_density() {
        let grid = KGrid::midpoint(16).unwrap();
        let cfg = IntegratorConfig::default();
        let taus = [5.0, 9.0];
        let ws = [0.0, 0.1];
        let s = run_sweep(Protocol::Multicritical, &taus, &ws, &grid, &cfg).unwrap();
        for (i, &w) in ws.iter().enumerate() {
            for (j, &tau) in taus.iter().enumerate() {
                let spec = ProtocolSpec::new(Protocol::Multicritical, tau).unwrap();
                let n = defect_density(&spec, &grid, NoiseConfig::new(w).unwrap(), &cfg).unwrap();
                assert_eq!(s.n_matrix[i][j], n);
            }
        }
        assert_eq!(s.row(0.1).unwrap(), s.n_matrix[1].as_slice());
        assert!(s.row(0.2).is_none());
    }

    #[test]
    fn negative_noise_is_rejected() {
        let grid = KGrid::midpoint(4).unwrap();
        let res = run_sweep(Protocol::Transverse, &[5.0], &[-0.1], &grid, &IntegratorConfig::default());
        assert!(matches!(res, Err(Error::Domain(_))));
    }
}

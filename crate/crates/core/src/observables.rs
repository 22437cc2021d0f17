//! Excitation probabilities, defect density and cutoff-momentum analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve_master, KModeState, NoiseConfig, STATE_TOL};
use crate::model::{build_hamiltonian, KGrid, KModeHamiltonian, Protocol, ProtocolSpec};
use crate::ode::IntegratorConfig;

/// `p_k` over a momentum grid for one `(protocol, τ, W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationProfile {
    pub protocol: Protocol,
    pub tau: f64,
    pub w: f64,
    pub k_values: Vec<f64>,
    pub p_values: Vec<f64>,
}

impl ExcitationProfile {
    pub fn new(
        protocol: Protocol,
        tau: f64,
        w: f64,
        k_values: Vec<f64>,
        p_values: Vec<f64>,
    ) -> Result<Self> {
        if k_values.len() != p_values.len() {
            return Err(Error::domain("k and p columns differ in length"));
        }
        if k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("k values must be strictly increasing"));
        }
        if p_values.iter().any(|p| !(-STATE_TOL..=1.0 + STATE_TOL).contains(p)) {
            return Err(Error::domain("excitation probability outside [0, 1]"));
        }
        Ok(Self { protocol, tau, w, k_values, p_values })
    }

    /// Grid average of `p_k`.
    pub fn defect_density(&self) -> f64 {
        mean(&self.p_values)
    }
}

/// Where the super-threshold region attached to `k_e` ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffResult {
    pub k_e: f64,
    pub k_c: f64,
    pub extent: f64,
    pub threshold: f64,
}

pub const DEFAULT_CUTOFF_THRESHOLD: f64 = 0.03;

/// `⟨E|ρ|E⟩` in the eigenbasis of `ham_final`, clipped to `[0, 1]`.
///
/// Values further than [`STATE_TOL`] outside the unit interval are errors.
pub fn excitation_probability(state: &KModeState, ham_final: &KModeHamiltonian) -> Result<f64> {
    let e = ham_final.energy();
    if e == 0.0 {
        return Err(Error::Degenerate { k: f64::NAN, t: f64::NAN });
    }
    // the excited state has Bloch vector +d/|d|
    let [x, _, z] = state.bloch;
    let p = 0.5 * (state.trace + (x * ham_final.dx + z * ham_final.dz) / e);
    if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&p) {
        return Err(Error::Invariant {
            k: f64::NAN,
            t: f64::NAN,
            reason: format!("excitation probability {p} outside [0, 1]"),
        });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `p_k` at the end of a master-equation quench of mode `k`.
pub fn mode_excitation(
    spec: &ProtocolSpec,
    k: f64,
    noise: NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let state = evolve_master(spec, k, noise, cfg)?;
    state.validate().map_err(|e| Error::Invariant {
        k,
        t: spec.window().1,
        reason: e.to_string(),
    })?;
    let ham = build_hamiltonian(spec, k, spec.window().1)?;
    excitation_probability(&state, &ham).map_err(|e| match e {
        Error::Degenerate { .. } => Error::Degenerate { k, t: spec.window().1 },
        other => other.at_k(k),
    })
}

/// Neumaier-compensated mean; insensitive to summation order at the 1e-16 level.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / xs.len() as f64
}

pub fn scan_excitations(
    spec: &ProtocolSpec,
    grid: &KGrid,
    noise: NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<ExcitationProfile> {
    let p_values = grid
        .points()
        .par_iter()
        .map(|&k| mode_excitation(spec, k, noise, cfg))
        .collect::<Result<Vec<_>>>()?;
    ExcitationProfile::new(spec.protocol(), spec.quench_time(), noise.w, grid.points().to_vec(), p_values)
}

/// `n_W = (1/N_k) Σ_k p_k`.
pub fn defect_density(
    spec: &ProtocolSpec,
    grid: &KGrid,
    noise: NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(scan_excitations(spec, grid, noise, cfg)?.defect_density())
}

/// Size of the contiguous region around `k_e` in which `p_k > threshold`.
pub fn cutoff_momentum(profile: &ExcitationProfile, k_e: f64, threshold: f64) -> Result<CutoffResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain(format!("threshold {threshold} outside (0, 1)")));
    }
    let from_start = if k_e == 0.0 {
        true
    } else if k_e == std::f64::consts::PI {
        false
    } else {
        return Err(Error::domain(format!("k_e must be 0 or π, got {k_e}")));
    };
    let pairs = profile.k_values.iter().zip(&profile.p_values);
    let above = |(_, p): &(&f64, &f64)| **p > threshold;
    let k_c = if from_start {
        pairs.take_while(above).last()
    } else {
        pairs.rev().take_while(above).last()
    }
    .map_or(k_e, |(k, _)| *k);
    Ok(CutoffResult { k_e, k_c, extent: (k_c - k_e).abs(), threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{instantaneous_eigenstates, Protocol};
    use std::f64::consts::PI;

    fn profile(k: Vec<f64>, p: Vec<f64>) -> ExcitationProfile {
        ExcitationProfile::new(Protocol::Transverse, 1.0, 0.0, k, p).unwrap()
    }

    #[test]
    fn ground_projector_has_no_excitation() {
        let ham = KModeHamiltonian::new(0.7, -1.3);
        let g = instantaneous_eigenstates(&ham).unwrap().ground;
        let psi = [g[0].into(), g[1].into()];
        let p = excitation_probability(&KModeState::pure(psi), &ham).unwrap();
        assert!(p.abs() < 1e-15);
        let x = instantaneous_eigenstates(&ham).unwrap().excited;
        let p = excitation_probability(&KModeState::pure([x[0].into(), x[1].into()]), &ham).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_state_is_half_excited() {
        for ham in [KModeHamiltonian::new(1.0, 0.0), KModeHamiltonian::new(-0.2, 3.0)] {
            let p = excitation_probability(&KModeState::maximally_mixed(), &ham).unwrap();
            assert!((p - 0.5).abs() < 1e-15);
        }
        assert!(excitation_probability(&KModeState::maximally_mixed(), &KModeHamiltonian::default())
            .is_err());
    }

    #[test]
    fn zone_edge_transverse_mode_is_fully_excited() {
        let spec = ProtocolSpec::new(Protocol::Transverse, 25.0).unwrap();
        let p = mode_excitation(&spec, PI, NoiseConfig::new(0.05).unwrap(), &IntegratorConfig::default())
            .unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn out_of_range_probability_is_an_error() {
        let bad = KModeState { trace: 1.0, bloch: [0.0, 0.0, 1.1] };
        assert!(excitation_probability(&bad, &KModeHamiltonian::new(1.0, 0.0)).is_err());
        let tiny = KModeState { trace: 1.0, bloch: [0.0, 0.0, 1.0 + 1e-12] };
        assert_eq!(excitation_probability(&tiny, &KModeHamiltonian::new(1.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn adiabatic_profile_has_zero_density() {
        let p = profile(vec![0.1, 0.2, 0.3], vec![0.0; 3]);
        assert_eq!(p.defect_density(), 0.0);
    }

    /// Sudden limit: the state cannot follow, so `p_k = |⟨E_k(end)|G_k(start)⟩|²`.
    #[test]
    fn sudden_quench_matches_static_overlap() {
        let tau = 1e-4;
        let spec = ProtocolSpec::new(Protocol::Transverse, tau).unwrap();
        let grid = KGrid::midpoint(40).unwrap();
        let (t0, t1) = spec.window();
        let overlaps: Vec<f64> = grid
            .points()
            .iter()
            .map(|&k| {
                let g = instantaneous_eigenstates(&build_hamiltonian(&spec, k, t0).unwrap()).unwrap();
                let e = instantaneous_eigenstates(&build_hamiltonian(&spec, k, t1).unwrap()).unwrap();
                (g.ground[0] * e.excited[0] + g.ground[1] * e.excited[1]).powi(2)
            })
            .collect();
        let oracle = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
        let n = defect_density(&spec, &grid, NoiseConfig::noiseless(), &IntegratorConfig::default())
            .unwrap();
        assert!((n - oracle).abs() < 1e-3, "{n} vs {oracle}");
    }

    #[test]
    fn step_profile_cutoff() {
        let k: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) * PI / 20.0).collect();
        let p: Vec<f64> = k.iter().map(|&k| if k < 1.0 { 1.0 } else { 0.0 }).collect();
        let c = cutoff_momentum(&profile(k.clone(), p), 0.0, 0.03).unwrap();
        let expected = k.iter().copied().filter(|&x| x < 1.0).fold(f64::MIN, f64::max);
        assert_eq!(c.k_c, expected);
        assert_eq!(c.extent, expected);
    }

    #[test]
    fn empty_region_has_zero_extent() {
        let k: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) * PI / 10.0).collect();
        let p = vec![0.01; 10];
        for k_e in [0.0, PI] {
            let c = cutoff_momentum(&profile(k.clone(), p.clone()), k_e, 0.03).unwrap();
            assert_eq!(c.extent, 0.0);
        }
    }

    #[test]
    fn cutoff_ignores_detached_bumps() {
        let k: Vec<f64> = (0..6).map(|i| (i as f64 + 0.5) * PI / 6.0).collect();
        let p = vec![0.0, 0.0, 0.5, 0.0, 0.2, 0.9];
        let c = cutoff_momentum(&profile(k.clone(), p), PI, 0.03).unwrap();
        assert_eq!(c.k_c, k[4]);
        assert!((c.extent - (PI - k[4])).abs() < 1e-15);
        assert!(cutoff_momentum(&profile(k, vec![0.0; 6]), 1.0, 0.03).is_err());
    }

    #[test]
    fn mean_is_order_independent() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 7919) % 1000) as f64 / 997.0).collect();
        let mut rev = xs.clone();
        rev.reverse();
        assert!((mean(&xs) - mean(&rev)).abs() < 1e-15);
    }
}

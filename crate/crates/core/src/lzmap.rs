//! Mapping of each k-mode quench onto a standard Landau-Zener sweep.
//!
//! A mode whose Hamiltonian can be written (after a fixed rotation in the
//! `σz`/`σx` plane) as `-2[(v t + C) σz + Δ σx]` is carried by
//! `t_LZ = 4Δ (t + C/v)` into `-(1/2)[v_LZ t_LZ σz + σx]` with
//! `v_LZ = v / (2Δ)²`. Its asymptotic excitation is `exp(-π / (2 v_LZ))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve_bloch, ground_bloch};
use crate::model::{check_momentum, KGrid, KModeHamiltonian, ModeDrive, Protocol, ProtocolSpec};
use crate::observables::{excitation_probability, mean};
use crate::ode::IntegratorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LZMapping {
    pub k: f64,
    pub v_lz: f64,
    pub t_scale: f64,
    pub t_offset: f64,
    /// Image of the evolution window, ordered so that `window_lz.0 < window_lz.1`.
    pub window_lz: (f64, f64),
}

impl LZMapping {
    pub fn to_lz_time(&self, t: f64) -> f64 {
        self.t_scale * (t + self.t_offset)
    }

    /// `-(1/2)[v_LZ s σz + σx]`.
    pub fn hamiltonian(&self, s: f64) -> KModeHamiltonian {
        KModeHamiltonian::new(-0.5 * self.v_lz * s, -0.5)
    }
}

/// Sweep rate `v`, gap factor `Δ` and offset `C` of the rotated mode Hamiltonian.
fn lz_parameters(spec: &ProtocolSpec, k: f64) -> (f64, f64, f64) {
    let (s, c) = k.sin_cos();
    let v = spec.velocity();
    let jl = spec.couplings_at(0.0);
    match spec.protocol() {
        // Δ = (Jx - Jy) sin k = Jγ sin k, C = J cos k
        Protocol::Transverse => (v, (jl.jx - jl.jy) * s, (jl.jx + jl.jy) * c),
        // rotate the driven direction (cos k, sin k) onto σz
        Protocol::Multicritical => {
            let (s2, c2) = (2.0 * k).sin_cos();
            (v, jl.jy * s2 + jl.h * s, jl.jy * c2 + jl.h * c)
        }
        // σx ↔ σz swap; the sweep acts on the off-diagonal element
        Protocol::GaplessLine => {
            let j = spec.total_coupling();
            (j * v * s, j * c + jl.h, 0.0)
        }
    }
}

pub fn lz_map(spec: &ProtocolSpec, k: f64) -> Result<LZMapping> {
    check_momentum(k)?;
    let (v, delta, offset) = lz_parameters(spec, k);
    if delta == 0.0 || v == 0.0 {
        return Err(Error::Degenerate { k, t: f64::NAN });
    }
    let t_offset = offset / v;
    let t_scale = match spec.protocol() {
        Protocol::GaplessLine => -4.0 * delta,
        _ => 4.0 * delta,
    };
    let v_lz = v / (2.0 * delta).powi(2);
    if !(v_lz.is_finite() && v_lz > 0.0) {
        return Err(Error::Degenerate { k, t: f64::NAN });
    }
    let (t0, t1) = spec.window();
    let (a, b) = (t_scale * (t0 + t_offset), t_scale * (t1 + t_offset));
    Ok(LZMapping { k, v_lz, t_scale, t_offset, window_lz: (a.min(b), a.max(b)) })
}

/// `P_LZ = exp(-π / (2 v_LZ))`; underflows to 0 in the adiabatic limit.
pub fn lz_probability(v_lz: f64) -> Result<f64> {
    if !(v_lz > 0.0) {
        return Err(Error::domain(format!("LZ velocity must be positive, got {v_lz}")));
    }
    Ok((-std::f64::consts::PI / (2.0 * v_lz)).exp())
}

/// True when both ends of the sweep lie outside the impulse region
/// `(-v_LZ^(-1/2), v_LZ^(-1/2))`.
pub fn impulse_region_check(mapping: &LZMapping) -> bool {
    let edge = mapping.v_lz.powf(-0.5);
    let (a, b) = mapping.window_lz;
    a.abs() >= edge && b.abs() >= edge
}

/// Noise-free excitation of the mode computed in the Landau-Zener frame.
pub fn standard_frame_excitation(mapping: &LZMapping, cfg: &IntegratorConfig) -> Result<f64> {
    let (s0, s1) = mapping.window_lz;
    let initial = ground_bloch(&mapping.hamiltonian(s0))
        .ok_or(Error::Degenerate { k: mapping.k, t: s0 })?;
    let state = evolve_bloch(|s| mapping.hamiltonian(s), [0.0; 3], 0.0, (s0, s1), initial, cfg)
        .map_err(|e| e.at_k(mapping.k))?;
    excitation_probability(&state, &mapping.hamiltonian(s1)).map_err(|e| e.at_k(mapping.k))
}

/// Midpoint-rule estimate of `n ≈ (1/π) ∫ P_LZ(k) dk`.
///
/// Modes without a valid mapping count as fully excited when `dz` changes sign
/// across the window (a level crossing with vanishing gap), otherwise as 0.
pub fn lz_defect_estimate(spec: &ProtocolSpec, grid: &KGrid) -> Result<f64> {
    let ps = grid
        .points()
        .iter()
        .map(|&k| match lz_map(spec, k) {
            Ok(m) => lz_probability(m.v_lz),
            Err(Error::Degenerate { .. }) => {
                let drive = ModeDrive::new(spec, k)?;
                let (t0, t1) = spec.window();
                let crossed = drive.at(t0).dz * drive.at(t1).dz < 0.0;
                Ok(if crossed { 1.0 } else { 0.0 })
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&ps))
}

/// One mapping per grid point; degenerate points are skipped.
pub fn lz_table(spec: &ProtocolSpec, grid: &KGrid) -> Vec<LZMapping> {
    grid.points().iter().filter_map(|&k| lz_map(spec, k).ok()).collect()
}

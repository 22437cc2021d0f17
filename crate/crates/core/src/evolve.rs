//! Time evolution of one k-mode under noisy driving.
//!
//! Two independent routes are provided:
//!
//! * [`evolve_master`] integrates the noise-averaged master equation
//!   `dρ/dt = -i[H(t), ρ] - (W²/2)[V, [V, ρ]]` in Bloch form. Writing
//!   `ρ = (I + r·σ)/2`, `H = d·σ` and `V = u·σ` gives
//!   `dr/dt = 2 d×r + 2W² (u (u·r) - |u|² r)`.
//! * [`evolve_trajectory`] samples one realisation of white noise and steps
//!   the state vector with exact 2×2 unitaries. Averaging many of them
//!   reproduces the master equation up to Monte-Carlo error.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_noise_operator, instantaneous_eigenstates, KModeHamiltonian, ModeDrive, ProtocolSpec,
};
use crate::ode::{integrate, IntegratorConfig};

/// Tolerance on trace and positivity of evolved states.
pub const STATE_TOL: f64 = 1e-9;

/// Density matrix of one k-mode, `ρ = (trace·I + r·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KModeState {
    pub trace: f64,
    pub bloch: [f64; 3],
}

impl KModeState {
    pub fn from_bloch(bloch: [f64; 3]) -> Self {
        Self { trace: 1.0, bloch }
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch([0.0; 3])
    }

    /// Projector onto a (not necessarily normalised) state vector.
    pub fn pure(psi: [Complex64; 2]) -> Self {
        let [a, b] = psi;
        let norm = a.norm_sqr() + b.norm_sqr();
        let ab = a * b.conj();
        Self {
            trace: 1.0,
            bloch: [2.0 * ab.re / norm, -2.0 * ab.im / norm, (a.norm_sqr() - b.norm_sqr()) / norm],
        }
    }

    pub fn from_matrix(rho: [[Complex64; 2]; 2]) -> Self {
        let trace = rho[0][0].re + rho[1][1].re;
        let off = rho[0][1] + rho[1][0].conj();
        Self {
            trace,
            bloch: [off.re, -off.im, rho[0][0].re - rho[1][1].re],
        }
    }

    pub fn density_matrix(&self) -> [[Complex64; 2]; 2] {
        let [x, y, z] = self.bloch;
        let t = self.trace;
        [
            [Complex64::new(0.5 * (t + z), 0.0), Complex64::new(0.5 * x, -0.5 * y)],
            [Complex64::new(0.5 * x, 0.5 * y), Complex64::new(0.5 * (t - z), 0.0)],
        ]
    }

    pub fn bloch_norm(&self) -> f64 {
        norm(&self.bloch)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        0.5 * (self.trace * self.trace + dot(&self.bloch, &self.bloch))
    }

    /// Eigenvalues of ρ, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let r = self.bloch_norm();
        [0.5 * (self.trace - r), 0.5 * (self.trace + r)]
    }

    /// Checks unit trace and positivity to [`STATE_TOL`].
    pub fn validate(&self) -> Result<()> {
        if self.bloch.iter().any(|x| !x.is_finite()) || !self.trace.is_finite() {
            return Err(Error::domain("non-finite density matrix"));
        }
        if (self.trace - 1.0).abs() > STATE_TOL {
            return Err(Error::domain(format!("trace {} differs from 1", self.trace)));
        }
        if self.eigenvalues()[0] < -STATE_TOL || self.bloch_norm() > 1.0 + STATE_TOL {
            return Err(Error::domain(format!("state not positive, |r| = {}", self.bloch_norm())));
        }
        Ok(())
    }

    /// `½‖ρ - σ‖₁`.
    pub fn trace_distance(&self, other: &KModeState) -> f64 {
        let dt = self.trace - other.trace;
        let dr = norm(&sub(&self.bloch, &other.bloch));
        0.25 * ((dt + dr).abs() + (dt - dr).abs())
    }
}

/// White-noise amplitude `W`, with `⟨η(t)η(t')⟩ = W² δ(t - t')`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub w: f64,
}

impl NoiseConfig {
    pub fn new(w: f64) -> Result<Self> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::domain(format!("noise amplitude must be finite and >= 0, got {w}")));
        }
        Ok(Self { w })
    }

    pub fn noiseless() -> Self {
        Self { w: 0.0 }
    }
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Bloch vector of the lower eigenstate of `H`, i.e. `-d/|d|`.
pub fn ground_bloch(ham: &KModeHamiltonian) -> Option<[f64; 3]> {
    let e = ham.energy();
    (e > 0.0).then(|| [-ham.dx / e, 0.0, -ham.dz / e])
}

/// Master-equation evolution of a Bloch vector under an arbitrary time-dependent
/// k-mode Hamiltonian, with purity and positivity checked after every step.
pub fn evolve_bloch<H>(
    hamiltonian: H,
    noise_axis: [f64; 3],
    w: f64,
    (t0, t1): (f64, f64),
    initial: [f64; 3],
    cfg: &IntegratorConfig,
) -> Result<KModeState>
where
    H: Fn(f64) -> KModeHamiltonian,
{
    let gamma = 2.0 * w * w;
    let u = noise_axis;
    let u2 = dot(&u, &u);
    let rhs = |t: f64, r: &[f64; 3]| {
        let d = hamiltonian(t).field();
        let rot = cross(&d, r);
        let proj = dot(&u, r);
        [
            2.0 * rot[0] + gamma * (u[0] * proj - u2 * r[0]),
            2.0 * rot[1] + gamma * (u[1] * proj - u2 * r[1]),
            2.0 * rot[2] + gamma * (u[2] * proj - u2 * r[2]),
        ]
    };

    let mut prev_sq = dot(&initial, &initial);
    let check = |t: f64, r: &[f64; 3]| {
        let sq = dot(r, r);
        if !sq.is_finite() {
            return Err(Error::Invariant { k: f64::NAN, t, reason: "non-finite state".into() });
        }
        if sq.sqrt() > 1.0 + STATE_TOL {
            return Err(Error::Invariant {
                k: f64::NAN,
                t,
                reason: format!("positivity lost, |r| = {}", sq.sqrt()),
            });
        }
        // Tr ρ² = (1 + |r|²)/2 never grows under pure dephasing
        if 0.5 * (sq - prev_sq) > STATE_TOL {
            return Err(Error::Invariant {
                k: f64::NAN,
                t,
                reason: format!("purity increased by {}", 0.5 * (sq - prev_sq)),
            });
        }
        prev_sq = sq;
        Ok(())
    };

    let (r, _) = integrate(rhs, t0, initial, t1, cfg, check)?;
    Ok(KModeState::from_bloch(r))
}

/// Noise-averaged state of mode `k` at the end of the quench, starting from the
/// instantaneous ground state at the start of the window.
pub fn evolve_master(
    spec: &ProtocolSpec,
    k: f64,
    noise: NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<KModeState> {
    let noise = NoiseConfig::new(noise.w)?;
    let drive = ModeDrive::new(spec, k)?;
    let v = build_noise_operator(spec, k)?;
    let (t0, t1) = spec.window();
    let initial = ground_bloch(&drive.at(t0)).ok_or(Error::Degenerate { k, t: t0 })?;
    evolve_bloch(|t| drive.at(t), v.field(), noise.w, (t0, t1), initial, cfg)
        .map_err(|e| e.at_k(k))
}

/// Derives an independent noise stream for `(seed, k, replicate)`.
///
/// Streams depend only on these three values, never on scheduling.
pub fn noise_stream(seed: u64, k: f64, replicate: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(k.to_bits()));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replicate);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn step_count(spec: &ProtocolSpec, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let (t0, t1) = spec.window();
    let n = (t1 - t0) / dt;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::domain(format!("dt = {dt} does not divide the window length {}", t1 - t0)));
    }
    Ok(rounded as usize)
}

/// Apply `exp(-i a·σ)` with `a = (ax, 0, az)`.
#[inline]
fn apply_rotation(psi: [Complex64; 2], ax: f64, az: f64) -> [Complex64; 2] {
    let theta = ax.hypot(az);
    if theta == 0.0 {
        return psi;
    }
    let (s, c) = theta.sin_cos();
    let (nx, nz) = (ax / theta, az / theta);
    let mis = Complex64::new(0.0, -s);
    // exp(-iθ n·σ) = cos θ - i sin θ (nz σz + nx σx)
    let [a, b] = psi;
    [a * c + mis * (nz * a + nx * b), b * c + mis * (nx * a - nz * b)]
}

fn run_trajectory(
    spec: &ProtocolSpec,
    k: f64,
    noise: NoiseConfig,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KModeState> {
    let drive = ModeDrive::new(spec, k)?;
    let v = build_noise_operator(spec, k)?;
    let (t0, t1) = spec.window();
    let dt = (t1 - t0) / steps as f64;
    let eig = instantaneous_eigenstates(&drive.at(t0)).map_err(|_| Error::Degenerate { k, t: t0 })?;
    let mut psi = [Complex64::new(eig.ground[0], 0.0), Complex64::new(eig.ground[1], 0.0)];
    let kick = noise.w * dt.sqrt();
    for n in 0..steps {
        let h = drive.at(t0 + (n as f64 + 0.5) * dt);
        let xi: f64 = if kick > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        psi = apply_rotation(psi, h.dx * dt + v.vx * kick * xi, h.dz * dt + v.vz * kick * xi);
        let n2 = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
        psi = [psi[0] / n2, psi[1] / n2];
    }
    Ok(KModeState::pure(psi))
}

/// One noise realisation of the stochastic Schrödinger equation, returned as `|ψ⟩⟨ψ|`.
///
/// Each step applies `exp(-i[H(t_mid) dt + V W √dt ξ])`, `ξ ~ N(0, 1)`.
pub fn evolve_trajectory(
    spec: &ProtocolSpec,
    k: f64,
    noise: NoiseConfig,
    dt: f64,
    seed: u64,
) -> Result<KModeState> {
    let noise = NoiseConfig::new(noise.w)?;
    let steps = step_count(spec, dt)?;
    run_trajectory(spec, k, noise, steps, &mut noise_stream(seed, k, 0))
}

/// `count` independent trajectories, replicate `i` drawing from stream `(seed, k, i)`.
pub fn trajectory_ensemble(
    spec: &ProtocolSpec,
    k: f64,
    noise: NoiseConfig,
    dt: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<KModeState>> {
    let noise = NoiseConfig::new(noise.w)?;
    let steps = step_count(spec, dt)?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| run_trajectory(spec, k, noise, steps, &mut noise_stream(seed, k, i)))
        .collect()
}

/// Element-wise mean of the density matrices and the largest standard error of
/// the mean over the real and imaginary parts of all four entries.
pub fn average_trajectories(states: &[KModeState]) -> Result<(KModeState, f64)> {
    if states.is_empty() {
        return Err(Error::domain("cannot average an empty ensemble"));
    }
    let m = states.len() as f64;
    let flatten = |s: &KModeState| {
        let rho = s.density_matrix();
        let mut out = [0.0; 8];
        for (i, z) in rho.iter().flatten().enumerate() {
            out[2 * i] = z.re;
            out[2 * i + 1] = z.im;
        }
        out
    };
    let mut mean = [0.0; 8];
    for s in states {
        s.validate()?;
        for (acc, x) in mean.iter_mut().zip(flatten(s)) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);

    let mut stderr = 0.0f64;
    if states.len() > 1 {
        let mut var = [0.0; 8];
        for s in states {
            for (acc, (x, mu)) in var.iter_mut().zip(flatten(s).iter().zip(&mean)) {
                *acc += (x - mu).powi(2);
            }
        }
        for v in var {
            stderr = stderr.max((v / (m - 1.0) / m).sqrt());
        }
    }
    let c = |i: usize| Complex64::new(mean[2 * i], mean[2 * i + 1]);
    let rho = [[c(0), c(1)], [c(2), c(3)]];
    Ok((KModeState::from_matrix(rho), stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Protocol;
    use std::f64::consts::PI;

    fn transverse(tau: f64) -> ProtocolSpec {
        ProtocolSpec::new(Protocol::Transverse, tau).unwrap()
    }

    fn excited_population(state: &KModeState, ham: &KModeHamiltonian) -> f64 {
        let e = ham.energy();
        0.5 * (state.trace + (state.bloch[0] * ham.dx + state.bloch[2] * ham.dz) / e)
    }

    #[test]
    fn zone_edge_mode_is_frozen_and_ends_excited() {
        let cfg = IntegratorConfig::default();
        for (tau, w) in [(5.0, 0.0), (40.0, 0.1), (120.0, 0.3)] {
            let spec = transverse(tau);
            let s = evolve_master(&spec, PI, NoiseConfig::new(w).unwrap(), &cfg).unwrap();
            let h_end = ModeDrive::new(&spec, PI).unwrap().at(spec.window().1);
            assert!((excited_population(&s, &h_end) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_evolution_stays_pure() {
        let cfg = IntegratorConfig::default();
        for p in Protocol::ALL {
            let spec = ProtocolSpec::new(p, 30.0).unwrap();
            for k in [0.3, 1.5, 2.9] {
                let s = evolve_master(&spec, k, NoiseConfig::noiseless(), &cfg).unwrap();
                assert!((s.purity() - 1.0).abs() < 1e-7, "{p} k={k}: {}", s.purity());
            }
        }
    }

    /// Fixed-step classical RK4 on the same Bloch equations, used as an
    /// independent reference.
    fn rk4_reference(spec: &ProtocolSpec, k: f64, steps: usize) -> [f64; 3] {
        let drive = ModeDrive::new(spec, k).unwrap();
        let (t0, t1) = spec.window();
        let h = (t1 - t0) / steps as f64;
        let f = |t: f64, r: [f64; 3]| {
            let d = drive.at(t).field();
            let c = cross(&d, &r);
            [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]]
        };
        let add = |r: [f64; 3], s: f64, k: [f64; 3]| [r[0] + s * k[0], r[1] + s * k[1], r[2] + s * k[2]];
        let mut r = ground_bloch(&drive.at(t0)).unwrap();
        for n in 0..steps {
            let t = t0 + n as f64 * h;
            let k1 = f(t, r);
            let k2 = f(t + 0.5 * h, add(r, 0.5 * h, k1));
            let k3 = f(t + 0.5 * h, add(r, 0.5 * h, k2));
            let k4 = f(t + h, add(r, h, k3));
            for i in 0..3 {
                r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        r
    }

    #[test]
    fn adaptive_solution_matches_fine_fixed_step_reference() {
        let tau = 20.0;
        let spec = transverse(tau);
        let k = 0.5;
        // step τ·1e-6
        let reference = rk4_reference(&spec, k, 1_000_000);
        let s = evolve_master(&spec, k, NoiseConfig::noiseless(), &IntegratorConfig::default())
            .unwrap();
        let h_end = ModeDrive::new(&spec, k).unwrap().at(spec.window().1);
        let p = excited_population(&s, &h_end);
        let p_ref = excited_population(&KModeState::from_bloch(reference), &h_end);
        assert!((p - p_ref).abs() < 1e-6, "{p} vs {p_ref}");
    }

    #[test]
    fn commuting_drive_keeps_bloch_vector_fixed() {
        // H = -2(1 + t/10) σz and V = σz commute at every time
        let initial = [0.0, 0.0, -1.0];
        let s = evolve_bloch(
            |t| KModeHamiltonian::new(-2.0 * (1.0 + 0.1 * t), 0.0),
            [0.0, 0.0, 1.0],
            0.5,
            (0.0, 5.0),
            initial,
            &IntegratorConfig::default(),
        )
        .unwrap();
        for (a, b) in s.bloch.iter().zip(initial) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn strong_noise_mixes_the_state() {
        let cfg = IntegratorConfig::default();
        for p in Protocol::ALL {
            let spec = ProtocolSpec::new(p, 100.0).unwrap();
            let s = evolve_master(&spec, 1.2, NoiseConfig::new(0.5).unwrap(), &cfg).unwrap();
            assert!(s.bloch_norm() < 0.05, "{p}: |r| = {}", s.bloch_norm());
        }
    }

    #[test]
    fn purity_decays_and_trace_is_preserved() {
        let spec = transverse(40.0);
        let drive = ModeDrive::new(&spec, 0.8).unwrap();
        let (t0, t1) = spec.window();
        let init = ground_bloch(&drive.at(t0)).unwrap();
        let mut last = 1.0;
        // evolve over a sequence of sub-windows and sample purity between them
        let mut r = init;
        let n = 20;
        for i in 0..n {
            let a = t0 + (t1 - t0) * i as f64 / n as f64;
            let b = t0 + (t1 - t0) * (i + 1) as f64 / n as f64;
            let s = evolve_bloch(|t| drive.at(t), [0.0, 0.0, -2.0], 0.1, (a, b), r,
                                 &IntegratorConfig::default()).unwrap();
            assert!(s.purity() <= last + 1e-9);
            assert!((s.trace - 1.0).abs() < 1e-12);
            let rho = s.density_matrix();
            assert!((rho[0][1] - rho[1][0].conj()).norm() < 1e-12);
            last = s.purity();
            r = s.bloch;
        }
        assert!(last < 1.0 - 1e-3);
    }

    #[test]
    fn trajectory_without_noise_matches_master_equation() {
        let spec = transverse(20.0);
        let k = 0.5;
        let master =
            evolve_master(&spec, k, NoiseConfig::noiseless(), &IntegratorConfig::default()).unwrap();
        let traj = evolve_trajectory(&spec, k, NoiseConfig::noiseless(), 2e-4, 7).unwrap();
        assert!(master.trace_distance(&traj) < 1e-6, "{}", master.trace_distance(&traj));
    }

    #[test]
    fn trajectories_are_deterministic_per_seed() {
        let spec = transverse(20.0);
        let noise = NoiseConfig::new(0.1).unwrap();
        let a = evolve_trajectory(&spec, 1.0, noise, 1e-2, 99).unwrap();
        let b = evolve_trajectory(&spec, 1.0, noise, 1e-2, 99).unwrap();
        let c = evolve_trajectory(&spec, 1.0, noise, 1e-2, 100).unwrap();
        assert_eq!(a.bloch.map(f64::to_bits), b.bloch.map(f64::to_bits));
        assert_ne!(a.bloch, c.bloch);
        assert!((a.bloch_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_rejects_bad_steps() {
        let spec = transverse(20.0);
        let noise = NoiseConfig::new(0.1).unwrap();
        assert!(matches!(evolve_trajectory(&spec, 1.0, noise, 0.0, 1), Err(Error::Domain(_))));
        assert!(matches!(evolve_trajectory(&spec, 1.0, noise, -1.0, 1), Err(Error::Domain(_))));
        assert!(matches!(evolve_trajectory(&spec, 1.0, noise, 0.3, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn averaging_identical_and_opposite_states() {
        let rho = KModeState::from_bloch([0.3, -0.2, 0.5]);
        let (mean, err) = average_trajectories(&[rho, rho]).unwrap();
        assert!(mean.trace_distance(&rho) < 1e-15);
        assert_eq!(err, 0.0);

        let up = KModeState::from_bloch([0.0, 0.0, 1.0]);
        let down = KModeState::from_bloch([0.0, 0.0, -1.0]);
        let (mean, err) = average_trajectories(&[up, down]).unwrap();
        assert!(mean.trace_distance(&KModeState::maximally_mixed()) < 1e-15);
        // diagonal entries are {1, 0}: sample sd 1/√2 over √2 samples
        assert!((err - 0.5).abs() < 1e-15);
        assert!(average_trajectories(&[]).is_err());
    }

    #[test]
    fn matrix_and_bloch_forms_agree() {
        let s = KModeState::from_bloch([0.1, 0.4, -0.7]);
        let back = KModeState::from_matrix(s.density_matrix());
        assert!(s.trace_distance(&back) < 1e-15);
        let psi = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let p = KModeState::pure(psi);
        let rho = p.density_matrix();
        assert!((rho[0][1] - psi[0] * psi[1].conj()).norm() < 1e-15);
        assert!((p.purity() - 1.0).abs() < 1e-15);
    }
}

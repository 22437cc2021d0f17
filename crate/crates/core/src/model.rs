//! Quench protocols and the two-level Hamiltonian of a single k-mode.
//!
//! After the Jordan-Wigner and Fourier reduction every momentum pair
//! `{k, -k}` evolves under
//!
//! ```text
//! H(k, t) = dz σz + dx σx,
//! dz = -2[(Jx + Jy) cos k + h],   dx = -2 (Jx - Jy) sin k,
//! ```
//!
//! with exactly one of `h`, `Jx` or `γ = (Jx - Jy)/J` ramped linearly in time.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three quench paths across the XY phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Ramp of the transverse field `h` through both PM/FM boundaries.
    Transverse,
    /// Ramp of `Jx` through the multicritical point at `h = J`, `γ = 0`.
    Multicritical,
    /// Ramp of the anisotropy `γ` along the gapless line `h = J`.
    #[serde(rename = "gapless", alias = "gaplessline")]
    GaplessLine,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [
        Protocol::Transverse,
        Protocol::Multicritical,
        Protocol::GaplessLine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Transverse => "transverse",
            Protocol::Multicritical => "multicritical",
            Protocol::GaplessLine => "gapless",
        }
    }

    /// Momenta around which excitations concentrate.
    pub fn excitation_centres(self) -> &'static [f64] {
        match self {
            Protocol::Transverse => &[0.0, PI],
            Protocol::Multicritical | Protocol::GaplessLine => &[PI],
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transverse" | "1" => Ok(Protocol::Transverse),
            "multicritical" | "2" => Ok(Protocol::Multicritical),
            "gapless" | "gaplessline" | "gapless-line" | "3" => Ok(Protocol::GaplessLine),
            other => Err(Error::domain(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Instantaneous couplings of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub jx: f64,
    pub jy: f64,
    pub h: f64,
}

/// A protocol together with its fixed couplings, ramp and quench time.
///
/// The driven parameter is `v·t` with `v = (ramp_end - ramp_start)/τ`, so the
/// evolution window is `[ramp_start/v, ramp_end/v]`. For [`Protocol::GaplessLine`]
/// `jx` and `jy` hold the couplings at `γ = 0`; only `J = jx + jy` enters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    protocol: Protocol,
    jx: f64,
    jy: f64,
    h_fixed: f64,
    ramp_start: f64,
    ramp_end: f64,
    quench_time: f64,
}

impl ProtocolSpec {
    /// The protocol with its standard couplings and ramp.
    pub fn new(protocol: Protocol, quench_time: f64) -> Result<Self> {
        let (jx, jy, h, start, end) = match protocol {
            Protocol::Transverse => (1.0, -1.0 / 3.0, 0.0, -5.0 / 3.0, 5.0 / 3.0),
            Protocol::Multicritical => (0.0, 1.0, 2.0, -1.0, 3.0),
            Protocol::GaplessLine => (0.5, 0.5, 1.0, -2.0, 2.0),
        };
        Self::custom(protocol, jx, jy, h, start, end, quench_time)
    }

    /// A protocol with user-chosen couplings. Fields that the protocol ramps are ignored.
    pub fn custom(
        protocol: Protocol,
        jx: f64,
        jy: f64,
        h_fixed: f64,
        ramp_start: f64,
        ramp_end: f64,
        quench_time: f64,
    ) -> Result<Self> {
        let all = [jx, jy, h_fixed, ramp_start, ramp_end, quench_time];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("protocol parameters must be finite"));
        }
        if quench_time <= 0.0 {
            return Err(Error::domain(format!("quench time must be positive, got {quench_time}")));
        }
        if ramp_end <= ramp_start {
            return Err(Error::domain("ramp must increase"));
        }
        if ramp_start >= 0.0 || ramp_end <= 0.0 {
            // driven(t) = v t, so the ramp has to straddle zero
            return Err(Error::domain("ramp must straddle zero"));
        }
        Ok(Self { protocol, jx, jy, h_fixed, ramp_start, ramp_end, quench_time })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn quench_time(&self) -> f64 {
        self.quench_time
    }

    pub fn ramp(&self) -> (f64, f64) {
        (self.ramp_start, self.ramp_end)
    }

    /// Same protocol and couplings with a different quench time.
    pub fn with_quench_time(&self, quench_time: f64) -> Result<Self> {
        Self::custom(
            self.protocol,
            self.jx,
            self.jy,
            self.h_fixed,
            self.ramp_start,
            self.ramp_end,
            quench_time,
        )
    }

    /// Ramp velocity `v_h`, `v_x` or `v_γ`.
    pub fn velocity(&self) -> f64 {
        (self.ramp_end - self.ramp_start) / self.quench_time
    }

    pub fn window(&self) -> (f64, f64) {
        let v = self.velocity();
        (self.ramp_start / v, self.ramp_end / v)
    }

    /// `J = Jx + Jy` for the gapless-line ramp.
    pub fn total_coupling(&self) -> f64 {
        self.jx + self.jy
    }

    pub fn driven_parameter(&self, t: f64) -> f64 {
        let (t0, t1) = self.window();
        if t == t0 {
            self.ramp_start
        } else if t == t1 {
            self.ramp_end
        } else {
            self.velocity() * t
        }
    }

    pub fn couplings_at(&self, t: f64) -> Couplings {
        let p = self.driven_parameter(t);
        match self.protocol {
            Protocol::Transverse => Couplings { jx: self.jx, jy: self.jy, h: p },
            Protocol::Multicritical => Couplings { jx: p, jy: self.jy, h: self.h_fixed },
            Protocol::GaplessLine => {
                let j = self.total_coupling();
                Couplings { jx: 0.5 * j * (1.0 + p), jy: 0.5 * j * (1.0 - p), h: self.h_fixed }
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (t0, t1) = self.window();
        let slack = 1e-12 * (t1 - t0);
        if !t.is_finite() || t < t0 - slack || t > t1 + slack {
            return Err(Error::domain(format!("t = {t} outside evolution window [{t0}, {t1}]")));
        }
        Ok(())
    }
}

pub(crate) fn check_momentum(k: f64) -> Result<()> {
    // closed interval: the endpoint modes are legitimate, if diagonal, two-level systems
    if !(0.0..=PI).contains(&k) {
        return Err(Error::domain(format!("k = {k} outside [0, π]")));
    }
    Ok(())
}

/// `dz σz + dx σx`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KModeHamiltonian {
    pub dz: f64,
    pub dx: f64,
}

impl KModeHamiltonian {
    pub fn new(dz: f64, dx: f64) -> Self {
        Self { dz, dx }
    }

    pub fn energy(&self) -> f64 {
        self.dz.hypot(self.dx)
    }

    pub fn gap(&self) -> f64 {
        2.0 * self.energy()
    }

    /// Bloch-space field vector `(x, y, z)`.
    pub fn field(&self) -> [f64; 3] {
        [self.dx, 0.0, self.dz]
    }
}

/// Noise coupling `V = vz σz + vx σx`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseOperator {
    pub vz: f64,
    pub vx: f64,
}

impl NoiseOperator {
    pub fn field(&self) -> [f64; 3] {
        [self.vx, 0.0, self.vz]
    }
}

/// Midpoint momentum grid `k_n = (n - 1/2) π / N_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    points: Vec<f64>,
}

impl KGrid {
    pub fn midpoint(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::domain("k grid needs at least one mode"));
        }
        let dk = PI / n_modes as f64;
        let points = (0..n_modes).map(|n| (n as f64 + 0.5) * dk).collect();
        Ok(Self { points })
    }

    pub fn n_modes(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// The Hamiltonian is affine in `t`; this caches the coefficients for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDrive {
    z0: f64,
    z1: f64,
    x0: f64,
    x1: f64,
}

impl ModeDrive {
    pub fn new(spec: &ProtocolSpec, k: f64) -> Result<Self> {
        check_momentum(k)?;
        let (s, c) = k.sin_cos();
        let v = spec.velocity();
        let drive = match spec.protocol {
            Protocol::Transverse => Self {
                z0: -2.0 * (spec.jx + spec.jy) * c,
                z1: -2.0 * v,
                x0: -2.0 * (spec.jx - spec.jy) * s,
                x1: 0.0,
            },
            Protocol::Multicritical => Self {
                z0: -2.0 * (spec.jy * c + spec.h_fixed),
                z1: -2.0 * v * c,
                x0: 2.0 * spec.jy * s,
                x1: -2.0 * v * s,
            },
            Protocol::GaplessLine => {
                let j = spec.total_coupling();
                Self { z0: -2.0 * (j * c + spec.h_fixed), z1: 0.0, x0: 0.0, x1: -2.0 * j * v * s }
            }
        };
        Ok(drive)
    }

    #[inline]
    pub fn at(&self, t: f64) -> KModeHamiltonian {
        KModeHamiltonian { dz: self.z0 + self.z1 * t, dx: self.x0 + self.x1 * t }
    }
}

pub fn build_hamiltonian(spec: &ProtocolSpec, k: f64, t: f64) -> Result<KModeHamiltonian> {
    check_momentum(k)?;
    spec.check_time(t)?;
    let Couplings { jx, jy, h } = spec.couplings_at(t);
    let (s, c) = k.sin_cos();
    Ok(KModeHamiltonian { dz: -2.0 * ((jx + jy) * c + h), dx: -2.0 * (jx - jy) * s })
}

/// The operator multiplying the control-field noise `η(t)`.
pub fn build_noise_operator(spec: &ProtocolSpec, k: f64) -> Result<NoiseOperator> {
    check_momentum(k)?;
    let (s, c) = k.sin_cos();
    Ok(match spec.protocol {
        Protocol::Transverse => NoiseOperator { vz: -2.0, vx: 0.0 },
        Protocol::Multicritical => NoiseOperator { vz: -2.0 * c, vx: -2.0 * s },
        Protocol::GaplessLine => NoiseOperator { vz: 0.0, vx: -2.0 * spec.total_coupling() * s },
    })
}

/// Normalised eigenvectors of a k-mode Hamiltonian, lower level first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpairs {
    pub ground: [f64; 2],
    pub excited: [f64; 2],
    pub gap: f64,
}

/// The Hamiltonian is real symmetric, so real eigenvectors suffice. Each vector
/// is fixed so that its first nonzero component is positive.
pub fn instantaneous_eigenstates(ham: &KModeHamiltonian) -> Result<Eigenpairs> {
    let KModeHamiltonian { dz, dx } = *ham;
    if !dz.is_finite() || !dx.is_finite() {
        return Err(Error::domain("non-finite Hamiltonian"));
    }
    let e = ham.energy();
    if e == 0.0 {
        return Err(Error::Degenerate { k: f64::NAN, t: f64::NAN });
    }
    // pick the row that avoids cancellation in dz ± e
    let (ground, excited) = if dz >= 0.0 {
        ([-dx, dz + e], [dz + e, dx])
    } else {
        ([dz - e, dx], [dx, e - dz])
    };
    Ok(Eigenpairs { ground: normalise(ground), excited: normalise(excited), gap: 2.0 * e })
}

fn normalise(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    let first = if v[0] != 0.0 { v[0] } else { v[1] };
    let s = first.signum() / n;
    [v[0] * s, v[1] * s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= EPS * (1.0 + b.abs())
    }

    #[test]
    fn transverse_midzone_hamiltonian() {
        let spec = ProtocolSpec::new(Protocol::Transverse, 40.0).unwrap();
        let h = build_hamiltonian(&spec, PI / 2.0, 0.0).unwrap();
        assert!(h.dz.abs() < EPS);
        assert!(close(h.dx, -8.0 / 3.0));
    }

    #[test]
    fn transverse_zone_edge_at_start() {
        let tau = 33.0;
        let spec = ProtocolSpec::new(Protocol::Transverse, tau).unwrap();
        let h = build_hamiltonian(&spec, PI, -tau / 2.0).unwrap();
        assert!(close(h.dz, 14.0 / 3.0));
        assert!(h.dx.abs() < EPS);
    }

    #[test]
    fn gapless_quarter_window() {
        let tau = 80.0;
        let spec = ProtocolSpec::new(Protocol::GaplessLine, tau).unwrap();
        let h = build_hamiltonian(&spec, PI / 2.0, tau / 8.0).unwrap();
        assert!(close(h.dz, -2.0));
        assert!(close(h.dx, -1.0));
    }

    #[test]
    fn windows_and_velocities() {
        let tau = 12.0;
        let t = ProtocolSpec::new(Protocol::Transverse, tau).unwrap();
        assert_eq!(t.window(), (-6.0, 6.0));
        assert!(close(t.velocity(), 10.0 / 3.0 / tau));
        let m = ProtocolSpec::new(Protocol::Multicritical, tau).unwrap();
        assert!(close(m.window().0, -3.0) && close(m.window().1, 9.0));
        assert!(close(m.velocity(), 4.0 / tau));
        let g = ProtocolSpec::new(Protocol::GaplessLine, tau).unwrap();
        assert!(close(g.window().0, -6.0) && close(g.window().1, 6.0));
        assert!(close(g.velocity(), 4.0 / tau));
    }

    #[test]
    fn ramp_endpoints_are_exact() {
        for p in Protocol::ALL {
            for tau in [1.0, 20.08, 244.7, 1e4] {
                let spec = ProtocolSpec::new(p, tau).unwrap();
                let (t0, t1) = spec.window();
                assert_eq!(spec.driven_parameter(t0), spec.ramp().0);
                assert_eq!(spec.driven_parameter(t1), spec.ramp().1);
            }
        }
    }

    #[test]
    fn rejects_time_outside_window_and_bad_inputs() {
        let spec = ProtocolSpec::new(Protocol::Transverse, 10.0).unwrap();
        assert!(matches!(build_hamiltonian(&spec, 1.0, 5.1), Err(Error::Domain(_))));
        assert!(matches!(build_hamiltonian(&spec, 1.0, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(build_hamiltonian(&spec, -0.1, 0.0), Err(Error::Domain(_))));
        assert!(ProtocolSpec::new(Protocol::Transverse, 0.0).is_err());
        assert!(ProtocolSpec::new(Protocol::Transverse, f64::INFINITY).is_err());
    }

    #[test]
    fn noise_operators() {
        let t = ProtocolSpec::new(Protocol::Transverse, 10.0).unwrap();
        for k in [0.1, 1.0, 3.0] {
            assert_eq!(build_noise_operator(&t, k).unwrap(), NoiseOperator { vz: -2.0, vx: 0.0 });
        }
        let m = ProtocolSpec::new(Protocol::Multicritical, 10.0).unwrap();
        let v = build_noise_operator(&m, PI / 2.0).unwrap();
        assert!(v.vz.abs() < EPS && close(v.vx, -2.0));
        let g = ProtocolSpec::new(Protocol::GaplessLine, 10.0).unwrap();
        let v = build_noise_operator(&g, PI / 2.0).unwrap();
        assert!(v.vz == 0.0 && close(v.vx, -2.0));
    }

    #[test]
    fn eigenstates_of_simple_hamiltonians() {
        let e = instantaneous_eigenstates(&KModeHamiltonian::new(-1.0, 0.0)).unwrap();
        assert_eq!(e.ground, [1.0, 0.0]);
        assert_eq!(e.gap, 2.0);
        let e = instantaneous_eigenstates(&KModeHamiltonian::new(0.0, 1.0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(e.ground[0], r) && close(e.ground[1], -r));
        assert!(close(e.gap, 2.0));
        assert!(matches!(
            instantaneous_eigenstates(&KModeHamiltonian::new(0.0, 0.0)),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn midpoint_grid() {
        let g = KGrid::midpoint(4).unwrap();
        let dk = PI / 4.0;
        assert_eq!(g.points(), &[0.5 * dk, 1.5 * dk, 2.5 * dk, 3.5 * dk]);
        assert!(KGrid::midpoint(0).is_err());
        let g = KGrid::midpoint(500).unwrap();
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
        assert!(g.points()[0] > 0.0 && *g.points().last().unwrap() < PI);
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("ising".parse::<Protocol>().is_err());
    }

    fn any_protocol() -> impl Strategy<Value = Protocol> {
        prop_oneof![
            Just(Protocol::Transverse),
            Just(Protocol::Multicritical),
            Just(Protocol::GaplessLine)
        ]
    }

    proptest! {
        #[test]
        fn eigenpairs_reconstruct_hamiltonian(dz in -10.0f64..10.0, dx in -10.0f64..10.0) {
            prop_assume!(dz.hypot(dx) > 1e-6);
            let ham = KModeHamiltonian::new(dz, dx);
            let e = instantaneous_eigenstates(&ham).unwrap();
            let en = 0.5 * e.gap;
            let (g, x) = (e.ground, e.excited);
            // H = E (|e><e| - |g><g|)
            let m00 = en * (x[0] * x[0] - g[0] * g[0]);
            let m01 = en * (x[0] * x[1] - g[0] * g[1]);
            let m11 = en * (x[1] * x[1] - g[1] * g[1]);
            let scale = en.max(1e-300);
            prop_assert!((m00 - dz).abs() / scale < 1e-12);
            prop_assert!((m11 + dz).abs() / scale < 1e-12);
            prop_assert!((m01 - dx).abs() / scale < 1e-12);
            prop_assert!((g[0] * x[0] + g[1] * x[1]).abs() < 1e-12);
        }

        #[test]
        fn cached_drive_matches_direct_construction(p in any_protocol(), tau in 1.0f64..300.0,
                                                    k in 0.0f64..PI, frac in 0.0f64..=1.0) {
            let spec = ProtocolSpec::new(p, tau).unwrap();
            let (t0, t1) = spec.window();
            let t = t0 + frac * (t1 - t0);
            let direct = build_hamiltonian(&spec, k, t).unwrap();
            let cached = ModeDrive::new(&spec, k).unwrap().at(t);
            prop_assert!((direct.dz - cached.dz).abs() < 1e-12 * (1.0 + direct.dz.abs()));
            prop_assert!((direct.dx - cached.dx).abs() < 1e-12 * (1.0 + direct.dx.abs()));
        }

        #[test]
        fn gapless_gap_at_zero_anisotropy(k in 0.0f64..PI, tau in 1.0f64..100.0) {
            let spec = ProtocolSpec::new(Protocol::GaplessLine, tau).unwrap();
            let gap = build_hamiltonian(&spec, k, 0.0).unwrap().gap();
            // dz = -2(cos k + 1), dx = 0, so the level splitting is 4|cos k + 1|
            prop_assert!((gap - 4.0 * (k.cos() + 1.0).abs()).abs() < 1e-12);
        }
    }
}

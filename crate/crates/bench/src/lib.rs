//! Shared workloads for the criterion benches.

use xychain::{IntegratorConfig, KGrid, Protocol, ProtocolSpec};

/// Quench time in the middle of the default fit window.
pub const BENCH_TAU: f64 = 90.0;

pub fn spec(protocol: Protocol) -> ProtocolSpec {
    ProtocolSpec::new(protocol, BENCH_TAU).expect("valid bench spec")
}

pub fn grid(n_modes: usize) -> KGrid {
    KGrid::midpoint(n_modes).expect("valid bench grid")
}

pub fn integrator() -> IntegratorConfig {
    IntegratorConfig::default()
}

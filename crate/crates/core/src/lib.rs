//! Noisy finite-time quenches of the anisotropic XY chain, solved one momentum
//! mode at a time.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod evolve;
pub mod lzmap;
pub mod model;
pub mod observables;
pub mod ode;
pub mod sweep;

pub use analysis::{
    fit_alpha, fit_linear_rate, fit_power_law, optimal_quench_time, LinearFit, NoiseInducedFit,
    OptimalTimeFit, PowerLawFit, DEFAULT_FIT_WINDOW, DEFAULT_NOISE_LEVELS,
};
pub use error::{Error, Result};
pub use evolve::{KModeState, NoiseConfig};
pub use lzmap::{lz_map, lz_probability, LZMapping};
pub use model::{KGrid, KModeHamiltonian, Protocol, ProtocolSpec};
pub use observables::{cutoff_momentum, defect_density, scan_excitations, CutoffResult, ExcitationProfile};
pub use ode::IntegratorConfig;
pub use sweep::{log_tau_grid, run_sweep, SweepResult};

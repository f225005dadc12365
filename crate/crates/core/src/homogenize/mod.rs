//! Homogenization: `N`-sweeps of `sigma_N(omega)` over seeded realizations,
//! and the exact infinite-volume `sigma(omega)` of periodic environments.

mod chain;
mod sweep;

pub use chain::{periodic_exact_sigma, EnvChain};
pub use sweep::{
    convergence_report, n_sweep, ConvergenceReport, EntryConvergence, EntryStats, Sweep, SweepFailure, SweepRecord,
};

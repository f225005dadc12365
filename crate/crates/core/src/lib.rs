//! Complex mobility of reversible random walks in random conductance
//! environments on discrete tori.
//!
//! A walker on the torus `T^d_N` jumps from `x` to `x + z`, `z` in a good
//! neighbourhood, at rate `c_{x,x+z}`. Under an oscillating field
//! `lambda cos(omega t) v` its mean velocity responds at first order as
//! `Re(e^{i omega t} sigma_N(omega) v)`. This crate computes the complex
//! mobility matrix `sigma_N(omega)` from the corrector equation, checks it
//! against an independent Floquet computation of the driven walk, and
//! follows `sigma_N` as `N` grows.
//!
//! ```
//! use rcm_core::env::{EnvironmentSpec, Neighborhood, torus_from_spec};
//! use rcm_core::mobility::mobility_matrix;
//! use rcm_core::solver::SolveConfig;
//!
//! let nbhd = Neighborhood::nearest(1);
//! let spec = EnvironmentSpec::constant(1.5);
//! let model = torus_from_spec(&spec, &nbhd, 8).unwrap();
//! let sigma = mobility_matrix(&model, 1.0, &SolveConfig::default()).unwrap();
//! assert!((sigma.get(0, 0).re - 3.0).abs() < 1e-12);
//! ```

pub mod env;
pub mod error;
pub mod floquet;
pub mod homogenize;
pub mod io;
pub mod mobility;
mod ode;
pub mod solver;
pub mod torus;

pub use env::{EnvironmentSpec, Neighborhood, TorusModel};
pub use error::{Error, Result};
pub use mobility::{mobility_matrix, MobilityMatrix};
pub use solver::SolveConfig;

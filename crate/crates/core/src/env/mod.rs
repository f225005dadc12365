//! Conductance environments on `Z^d` and their periodization onto tori.

mod field;
mod neighborhood;
mod spec;
mod torus_model;

pub use field::{ergodic_average, sample_field, ConductanceField};
pub use neighborhood::Neighborhood;
pub use spec::{EnvironmentKind, EnvironmentSpec, Law};
pub use torus_model::{periodize, torus_from_spec, TorusModel};

pub(crate) use spec::{pattern_cell, stream_key};

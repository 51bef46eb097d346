//! Equivariant Fuller indices for symmetric vector fields on Euclidean
//! domains: finite-group bookkeeping (subgroup lattices, tables of marks),
//! equivariant Poincare sections, periodic-orbit location, fixed-point
//! indices on fixed-point strata, and the rational Burnside-module valued
//! index assembled from them.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod fuller;
pub mod group;
pub mod harness;
pub mod index;
pub mod nondeg;
pub mod ode;
pub mod orbits;
pub mod region;
pub mod sweep;
pub mod systems;
pub mod tomdieck;

pub use error::{EquifullerError, Result};

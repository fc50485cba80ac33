//! Split Hamiltonian finite elements (P1/P0) for the rotating shallow-water
//! slice model.
//!
//! The prognostic equations are assembled from metric-free pairings only and
//! conserve mass and total potential vorticity for every choice of metric
//! closure; the closures ([`closures::ClosureKind`]) set accuracy and the
//! discrete dispersion relation.

pub mod cli_io;
pub mod closures;
pub mod diagnostics;
pub mod dispersion;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod integrators;
pub mod mesh;
pub mod operators;
pub mod quadrature;
pub mod solver;
pub mod testcases;

pub use closures::{ClosureKind, ClosureSpec};
pub use error::{Error, Result};
pub use fields::{ElementField, ModelParams, NodalField, State, Tendency};
pub use mesh::Mesh;
pub use operators::Operators;

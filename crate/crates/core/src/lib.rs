//! Numerical laboratory for Ginzburg-Landau vortices driven by an applied
//! current and held by a pinning potential.
//!
//! The crate solves the auxiliary elliptic problems that encode the applied
//! current ([`pinning`]), time-integrates the forced and pinned
//! Ginzburg-Landau equations ([`sim`]), detects and tracks vortices
//! ([`vortex`]), evaluates energies and the evolution identities
//! ([`energy`]), integrates the limiting point-vortex law ([`law`]) and
//! compares the two in reproducible studies ([`studies`]).

pub mod commands;
pub mod config;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod expr;
pub mod grid;
pub mod interp;
pub mod io;
pub mod landscape;
pub mod law;
pub mod pinning;
pub mod sim;
pub mod snapshot;
pub mod studies;
pub mod vortex;

pub use error::{Error, Result};
pub use grid::{ComplexField, Edge, EdgeValues, Grid, ScalarField, VectorField};
pub use num_complex::Complex64;

//! Simulation and analysis toolkit for programmable two-dimensional Rydberg
//! atom arrays.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: array geometries and the van der Waals interaction matrix.
//! - [`hilbert`]: full or blockade-constrained many-body bases and state vectors.
//! - [`hamiltonian`]: the matrix-free driven Ising operator and drive schedules.
//! - [`evolve`]: time evolution, ground states and static expectation values.
//! - [`measure`]: projective shot sampling and detection noise.
//! - [`analysis`]: correlators, order parameters, critical point and scaling collapse.
//! - [`meanfield`]: sublattice mean-field energies and single-atom quench response.
//! - [`rearrange`]: parallel tweezer rearrangement planning and simulation.

pub mod analysis;
pub mod error;
pub mod evolve;
pub mod hamiltonian;
pub mod hilbert;
pub mod lattice;
pub mod meanfield;
pub mod measure;
pub mod rearrange;
pub mod units;

pub use error::{Error, Result};

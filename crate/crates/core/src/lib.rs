//! Quantum-optical high-harmonic generation from a laser-driven Fermi-Hubbard chain.
//!
//! The pipeline runs in stages:
//!
//! 1. [`lattice`] builds the symmetry-reduced many-body basis and the driven operators.
//! 2. [`spectral`] diagonalizes the field-free Hamiltonian.
//! 3. [`propagate`] evolves every eigenstate through the pulse and records
//!    transition currents `j_{m,n}(t)`.
//! 4. [`photonics`] solves the single-mode photonic equations of motion at
//!    three approximation levels and evaluates the closed-form Markov state.
//! 5. [`observables`] turns photonic states into spectra, Mandel-Q and squeezing.
//!
//! [`runner`] wires the stages together behind a configuration file and caches.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lattice;
pub mod observables;
pub mod photonics;
pub mod propagate;
pub mod pulse;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};

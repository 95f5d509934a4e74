//! Simulation toolkit for phonon-mediated two-qubit gates in trapped-ion
//! crystals protected by a continuous carrier drive.
//!
//! The crate is layered bottom-up: [`crystal`] solves the ion chain and its
//! transverse modes, [`operators`] provides the qubit ⊗ Fock algebra,
//! [`hamiltonian`] assembles the carrier and red-sideband terms,
//! [`effective`] holds the analytic oracles, [`noise`] the dephasing
//! process, [`propagate`] the time evolution, [`fidelity`] the gate metrics
//! and [`experiments`] the configured pipelines.

// Links the system OpenBLAS/LAPACK used by the spectral propagator.
extern crate openblas_src;

pub mod chebyshev;
pub mod dense;
pub mod crystal;
pub mod error;
pub mod expm;
pub mod operators;
pub mod sparse;

pub use error::{Error, Result};
pub mod effective;
pub mod experiments;
pub mod fidelity;
pub mod hamiltonian;
pub mod noise;
pub mod propagate;

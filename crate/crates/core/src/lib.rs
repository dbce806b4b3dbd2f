//! Solvers for time-fractional molecular beam epitaxy models.
//!
//! The Caputo derivative is discretized with the L1+ formula on arbitrary
//! nonuniform meshes; the nonlinear flux is handled by a scalar auxiliary
//! variable so each step is a pair of constant-coefficient spectral solves.

pub mod adaptive;
pub mod caputo;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod quadrature;
pub mod sav;
pub mod soe;
pub mod spectral;
pub mod timemesh;

pub use error::{Error, Result};

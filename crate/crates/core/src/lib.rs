//! Compilation and simulation of small fermionic lattice models on a
//! superconducting-qubit gate set.

pub mod benchmarking;
pub mod circuit;
pub mod compiler;
pub mod error;
pub mod experiments;
pub mod fermion;
pub mod linalg;
pub mod pauli;
pub mod simulator;
pub mod tomography;

pub use error::{Error, Result};

//! Numerical engine for linear relativistic wave equations on periodic
//! lattices: companion-form order reduction, time-ordered propagation,
//! frame-bundle transport and an oracle-backed invariant harness.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod error;
pub mod evolution;
pub mod frames;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod lattice;
pub mod reduction;
pub mod solver;
pub mod sparse;
pub mod state;

pub use error::{Error, Result};

/// Complex double used for every field and matrix entry.
pub type C64 = num_complex::Complex64;

//! Lieb-Robinson certification for classical oscillator lattices on a torus.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod anharmonic;
pub mod bounds;
pub mod error;
pub mod expcli;
pub mod harmonic;
pub mod lattice;
pub mod observables;
pub mod quadrature;

pub use error::{Error, Result};

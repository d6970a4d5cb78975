//! Numerical laboratory for Nevanlinna-type kernel summability methods.
//!
//! The crate builds admissible kernels, applies the kernel transform to
//! functions and series, studies absolute summability of derived conjugate
//! Fourier series and checks the kernel-sum estimates empirically.

// NaN-rejecting range checks are written as `!(x > 0.0)`; quadrature tables
// keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod accel;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod fourier;
pub mod kernel;
pub mod quad;
pub mod regression;
pub mod transform;

pub use error::{Error, Result};

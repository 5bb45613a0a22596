//! Two-dimensional single-active-electron TDSE solver for elliptically
//! polarized laser pulses, using the split-operator Fourier method.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod observables;
pub mod physics;
pub mod propagator;
pub mod scans;

pub use error::{Error, Result};

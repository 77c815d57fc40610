#![no_std]
// `!(x > y)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
extern crate alloc;

pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod signal;
pub mod spectra;
pub mod spin;

pub use error::{Error, Result};
pub use num_complex::Complex64;

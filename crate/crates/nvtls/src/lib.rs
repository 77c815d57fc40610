//! Std companion of `nvtls-core`: run configuration, schedule files, CSV
//! output, parallel sweeps and the `nvtls` command line.

// `!(x > y)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod schedule;
pub mod sweep;

pub use error::{CliError, CliResult};

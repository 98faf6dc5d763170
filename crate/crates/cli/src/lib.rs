//! Command-line plumbing around `alin-core`: file-based problems,
//! synthetic data, PGM image denoising and deblurring, reference oracles
//! and trace conversion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
mod error;
pub mod imaging;
pub mod oracle;
pub mod synth;
pub mod trace;

pub use error::{CliError, CliResult};

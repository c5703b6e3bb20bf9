//! Spectral Galerkin simulation of a Gierer-Meinhardt activator-inhibitor
//! system driven by multiplicative Wiener noise, with tools for the
//! Picard-type fixed-point map, pathwise uniqueness and moment bounds.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli_io;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod functionals;
pub mod noise;
pub mod spectral_basis;

pub use error::{Error, Result};

//! Numerical laboratory for viscous 2-shocks of the barotropic Navier–Stokes
//! equations on a half-line with an outflow boundary.
//!
//! The crate builds the shock connection and its viscous profile, simulates
//! the initial–boundary value problem with a dynamically shifted reference
//! wave, and records the weighted relative-entropy diagnostics that govern
//! the stability of the shock.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod hugoniot;
pub mod profile;
pub mod shift;
pub mod solver;
pub mod diagnostics;
pub mod experiments;

pub use error::{Error, Result};
pub use exec::Exec;

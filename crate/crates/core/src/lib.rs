//! Spectral laboratory for modified scattering of long-range Hartree equations.
//!
//! Fields live on a periodic cube `[-L, L)^n`. The auxiliary amplitude/phase
//! system is integrated in the fixed frame where the free Schrödinger flow is
//! trivial, and asymptotic profiles are compared against it to measure decay
//! rates.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod model;
pub mod profiles;
pub mod rate_lab;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};

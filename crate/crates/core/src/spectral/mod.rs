//! Periodic grid fields, Fourier multipliers and norms.

pub mod fft;
mod field;
pub mod gaussian;
pub(crate) mod grid;
pub mod io;
pub mod norms;
pub mod ops;

pub use field::{ComplexField, RealField, VectorField};
pub use gaussian::{GaussianOp, GaussianSymbol};
pub use grid::GridSpec;
pub use norms::{
    galilei_norm, homogeneous_norm, lr_norm, norm_report, sobolev_norm, x_norm, NormReport,
    VelocityNorm,
};
pub use ops::{apply_multiplier, dealias, free_propagator, gradient, riesz_potential};

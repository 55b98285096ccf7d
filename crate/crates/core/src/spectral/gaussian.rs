//! Closed-form action of the basic unitaries on centered complex Gaussians
//! `A exp(-a |x|^2 / 2)` with `Re a > 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexField, GridSpec};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSymbol {
    pub amplitude: Complex64,
    pub width: Complex64,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GaussianOp {
    /// Unitary Fourier transform with kernel `(2 pi)^(-n/2) exp(-i x.xi)`.
    Fourier,
    /// Multiplication by `exp(i |x|^2 / 2t)`.
    Chirp(f64),
    /// `(it)^(-n/2) f(x / t)`.
    Dilation(f64),
    /// Free group `exp(i t Laplacian / 2)`.
    Free(f64),
}

fn half_power(z: Complex64, dim: usize) -> Complex64 {
    // principal branch of z^(-n/2)
    (-(dim as f64) / 2.0 * z.ln()).exp()
}

impl GaussianSymbol {
    pub fn new(amplitude: Complex64, width: Complex64, dim: usize) -> Result<Self> {
        if !(width.re > 0.0) {
            return Err(Error::Parameter(format!(
                "Gaussian width parameter needs a positive real part, got {width}"
            )));
        }
        Ok(GaussianSymbol {
            amplitude,
            width,
            dim,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.amplitude * (-0.5 * self.width * r2).exp()
    }

    pub fn sample(&self, grid: &GridSpec) -> ComplexField {
        ComplexField::from_fn(*grid, |x| self.eval(x))
    }

    pub fn apply(&self, op: GaussianOp) -> Result<GaussianSymbol> {
        let n = self.dim;
        let (amplitude, width) = match op {
            GaussianOp::Fourier => (self.amplitude * half_power(self.width, n), 1.0 / self.width),
            GaussianOp::Chirp(t) => {
                if t == 0.0 {
                    return Err(Error::Parameter("chirp needs t != 0".into()));
                }
                (self.amplitude, self.width - I / t)
            }
            GaussianOp::Dilation(t) => {
                if t == 0.0 {
                    return Err(Error::Parameter("dilation needs t != 0".into()));
                }
                (self.amplitude * half_power(I * t, n), self.width / (t * t))
            }
            GaussianOp::Free(t) => {
                let z = 1.0 + I * self.width * t;
                (self.amplitude * half_power(z, n), self.width / z)
            }
        };
        GaussianSymbol::new(amplitude, width, n)
    }

    /// Applies `ops` right to left, as in operator composition.
    pub fn compose(&self, ops: &[GaussianOp]) -> Result<GaussianSymbol> {
        ops.iter().rev().try_fold(*self, |g, &op| g.apply(op))
    }

    /// Largest parameter discrepancy between two symbols.
    pub fn distance(&self, other: &GaussianSymbol) -> f64 {
        (self.amplitude - other.amplitude)
            .norm()
            .max((self.width - other.width).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> GaussianSymbol {
        GaussianSymbol::new(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), dim).unwrap()
    }

    #[test]
    fn chirp_dilation_fourier_chirp_is_free_flow() {
        for t in [1.0, 2.0, 10.0] {
            let g = unit(3);
            let composed = g
                .compose(&[
                    GaussianOp::Chirp(t),
                    GaussianOp::Dilation(t),
                    GaussianOp::Fourier,
                    GaussianOp::Chirp(t),
                ])
                .unwrap();
            let direct = g.apply(GaussianOp::Free(t)).unwrap();
            assert!(composed.distance(&direct) <= 1e-12, "t = {t}");
        }
    }

    #[test]
    fn double_fourier_keeps_even_gaussian() {
        for dim in 1..=4 {
            let g = GaussianSymbol::new(Complex64::new(0.7, 0.2), Complex64::new(1.3, 0.4), dim)
                .unwrap();
            let ff = g
                .compose(&[GaussianOp::Fourier, GaussianOp::Fourier])
                .unwrap();
            // F^2 f(x) = f(-x), which is f itself for centered Gaussians
            assert!(ff.distance(&g) < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn unit_dilation_only_rotates_amplitude() {
        let g = unit(3);
        let d = g.apply(GaussianOp::Dilation(1.0)).unwrap();
        assert_eq!(d.width, g.width);
        let expect = (-1.5 * I * std::f64::consts::FRAC_PI_2).exp();
        assert!((d.amplitude - expect).norm() < 1e-15);
    }

    #[test]
    fn degenerate_times_rejected() {
        let g = unit(3);
        assert!(g.apply(GaussianOp::Chirp(0.0)).is_err());
        assert!(g.apply(GaussianOp::Dilation(0.0)).is_err());
        assert!(
            GaussianSymbol::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), 3).is_err()
        );
    }
}

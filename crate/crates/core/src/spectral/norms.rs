use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ops::{derivative_symbol, multi_indices, real_spectra, spectrum};
use super::{ComplexField, GridSpec, RealField, VectorField};
use crate::{Error, Result};

/// `delta(r) = n/2 - n/r`.
pub fn delta_exponent(dim: usize, r: f64) -> f64 {
    let n = dim as f64;
    if r.is_infinite() {
        n / 2.0
    } else {
        n / 2.0 - n / r
    }
}

/// Lebesgue exponent of the low-order part of the velocity space.
pub fn velocity_lebesgue_exponent(dim: usize) -> f64 {
    if dim % 2 == 1 {
        2.0 * dim as f64
    } else {
        f64::INFINITY
    }
}

/// Homogeneous order of the low-order part of the velocity space, `floor(n/2)`.
pub fn velocity_low_order(dim: usize) -> usize {
    dim / 2
}

/// Sum over multi-indices of order `j` of the L2 norm of the derivative,
/// for a field given by the spectra of its components.
fn hdot_from_spectra(grid: &GridSpec, spectra: &[Vec<Complex64>], j: usize) -> f64 {
    let weight = grid.cell_volume() / grid.len() as f64;
    let tables = grid.tables();
    if j == 0 {
        let s: f64 = spectra
            .iter()
            .flat_map(|sp| sp.iter())
            .map(|z| z.norm_sqr())
            .sum();
        return (weight * s).sqrt();
    }
    multi_indices(grid.dim, j)
        .iter()
        .map(|alpha| {
            let mut s = 0.0;
            for sp in spectra {
                for (flat, z) in sp.iter().enumerate() {
                    s += (derivative_symbol(&tables, alpha, flat) * z).norm_sqr();
                }
            }
            (weight * s).sqrt()
        })
        .sum()
}

fn sobolev_from_spectra(grid: &GridSpec, spectra: &[Vec<Complex64>], k: usize) -> f64 {
    (0..=k).map(|j| hdot_from_spectra(grid, spectra, j)).sum()
}

/// Grid L2 norm, `(h^n sum |f|^2)^(1/2)`.
pub fn l2_norm(f: &ComplexField) -> f64 {
    let s: f64 = f.values().iter().map(|z| z.norm_sqr()).sum();
    (f.grid().cell_volume() * s).sqrt()
}

pub fn real_l2_norm(f: &RealField) -> f64 {
    let s: f64 = f.values().iter().map(|v| v * v).sum();
    (f.grid().cell_volume() * s).sqrt()
}

/// `sum_{j <= k} sum_{|alpha| = j} || d^alpha f ||_2`.
pub fn sobolev_norm(f: &ComplexField, k: usize) -> f64 {
    sobolev_from_spectra(f.grid(), &[spectrum(f)], k)
}

/// `sum_{|alpha| = k} || d^alpha f ||_2`.
pub fn homogeneous_norm(f: &ComplexField, k: usize) -> f64 {
    hdot_from_spectra(f.grid(), &[spectrum(f)], k)
}

pub fn real_sobolev_norm(f: &RealField, k: usize) -> f64 {
    sobolev_from_spectra(f.grid(), &real_spectra(&[f]), k)
}

fn check_exponent(r: f64) -> Result<()> {
    if r >= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "Lebesgue exponent r = {r} must be >= 1"
        )))
    }
}

fn lr_of_moduli(grid: &GridSpec, moduli: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        return moduli.fold(0.0, f64::max);
    }
    let s: f64 = moduli.map(|m| m.powf(r)).sum();
    (grid.cell_volume() * s).powf(1.0 / r)
}

/// Grid L^r norm; `r = inf` is the grid maximum.
pub fn lr_norm(f: &ComplexField, r: f64) -> Result<f64> {
    check_exponent(r)?;
    Ok(lr_of_moduli(
        f.grid(),
        f.values().iter().map(|z| z.norm()),
        r,
    ))
}

pub fn real_lr_norm(f: &RealField, r: f64) -> Result<f64> {
    check_exponent(r)?;
    Ok(lr_of_moduli(
        f.grid(),
        f.values().iter().map(|v| v.abs()),
        r,
    ))
}

/// L^r norm of the pointwise Euclidean length.
pub fn vector_lr_norm(s: &VectorField, r: f64) -> Result<f64> {
    check_exponent(r)?;
    let len2 = s.length_squared();
    Ok(lr_of_moduli(
        s.grid(),
        len2.values().iter().map(|v| v.sqrt()),
        r,
    ))
}

pub fn vector_homogeneous_norm(s: &VectorField, j: usize) -> f64 {
    let comps: Vec<&RealField> = s.components().iter().collect();
    hdot_from_spectra(s.grid(), &real_spectra(&comps), j)
}

/// The three constituents of the velocity-space norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityNorm {
    pub lebesgue: f64,
    pub low: f64,
    pub high: f64,
}

impl VelocityNorm {
    pub fn total(&self) -> f64 {
        self.lebesgue + self.low + self.high
    }
}

/// `L^{r0} + Hdot^{floor(n/2)} + Hdot^{l+1}` with `r0 = 2n` for odd `n`, `inf` for even.
pub fn velocity_norm_parts(s: &VectorField, l: usize) -> VelocityNorm {
    let grid = s.grid();
    let comps: Vec<&RealField> = s.components().iter().collect();
    let spectra = real_spectra(&comps);
    let r0 = velocity_lebesgue_exponent(grid.dim);
    VelocityNorm {
        lebesgue: vector_lr_norm(s, r0).expect("r0 >= 2"),
        low: hdot_from_spectra(grid, &spectra, velocity_low_order(grid.dim)),
        high: hdot_from_spectra(grid, &spectra, l + 1),
    }
}

pub fn x_norm(s: &VectorField, l: usize) -> f64 {
    velocity_norm_parts(s, l).total()
}

/// `|| (1 + |xi|^2)^(k/2) v^ ||_2`, the L2 norm of the Galilei-weighted field.
pub fn galilei_norm(v: &ComplexField, k: usize) -> f64 {
    let grid = v.grid();
    let tables = grid.tables();
    let data = spectrum(v);
    let s: f64 = data
        .iter()
        .zip(&tables.xi_sq)
        .map(|(z, &k2)| (1.0 + k2).powi(k as i32) * z.norm_sqr())
        .sum();
    (grid.cell_volume() / grid.len() as f64 * s).sqrt()
}

/// Batch of norms of one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `H^j` for `j = 0..=k_max`.
    pub h_norms: Vec<f64>,
    /// `Hdot^j` for `j = 0..=k_max`.
    pub hdot_norms: Vec<f64>,
    /// `(r, L^r)` pairs.
    pub lr_norms: Vec<(f64, f64)>,
    pub x_norm: Option<VelocityNorm>,
}

pub fn norm_report(f: &ComplexField, k_max: usize, exponents: &[f64]) -> Result<NormReport> {
    let spectra = [spectrum(f)];
    let hdot_norms: Vec<f64> = (0..=k_max)
        .map(|j| hdot_from_spectra(f.grid(), &spectra, j))
        .collect();
    let h_norms = hdot_norms
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let lr_norms = exponents
        .iter()
        .map(|&r| lr_norm(f, r).map(|v| (r, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormReport {
        h_norms,
        hdot_norms,
        lr_norms,
        x_norm: None,
    })
}

pub fn vector_norm_report(s: &VectorField, l: usize, exponents: &[f64]) -> Result<NormReport> {
    let comps: Vec<&RealField> = s.components().iter().collect();
    let spectra = real_spectra(&comps);
    let hdot_norms: Vec<f64> = (0..=l + 1)
        .map(|j| hdot_from_spectra(s.grid(), &spectra, j))
        .collect();
    let h_norms = hdot_norms
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let lr_norms = exponents
        .iter()
        .map(|&r| vector_lr_norm(s, r).map(|v| (r, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormReport {
        h_norms,
        hdot_norms,
        lr_norms,
        x_norm: Some(velocity_norm_parts(s, l)),
    })
}

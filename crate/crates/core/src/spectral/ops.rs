use num_complex::Complex64;

use super::grid::Tables;
use super::{fft, ComplexField, GridSpec, RealField, VectorField};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Forward transform of a field, FFT slot order.
pub fn spectrum(f: &ComplexField) -> Vec<Complex64> {
    let mut data = f.values().to_vec();
    fft::forward(f.grid(), &mut data);
    data
}

pub fn real_spectrum(f: &RealField) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::forward(f.grid(), &mut data);
    data
}

pub fn from_spectrum(grid: GridSpec, mut data: Vec<Complex64>) -> ComplexField {
    fft::inverse(&grid, &mut data);
    ComplexField::from_vec(grid, data)
}

/// Real part of the inverse transform.
pub fn real_from_spectrum(grid: GridSpec, mut data: Vec<Complex64>) -> RealField {
    fft::inverse(&grid, &mut data);
    RealField::from_vec(grid, data.into_iter().map(|z| z.re).collect())
}

/// `F^{-1}[symbol(xi) F f]`.
pub fn apply_multiplier(
    f: &ComplexField,
    symbol: impl Fn(&[f64]) -> Complex64,
) -> Result<ComplexField> {
    let grid = *f.grid();
    let tables = grid.tables();
    let mut data = spectrum(f);
    let mut xi = vec![0.0; grid.dim];
    for (flat, z) in data.iter_mut().enumerate() {
        for (axis, x) in xi.iter_mut().enumerate() {
            *x = tables.xi[axis][flat];
        }
        let m = symbol(&xi);
        if !(m.re.is_finite() && m.im.is_finite()) {
            return Err(Error::Parameter(format!(
                "symbol is not finite at xi = {xi:?}"
            )));
        }
        *z *= m;
    }
    Ok(from_spectrum(grid, data))
}

pub(crate) fn check_riesz_order(mu: f64, dim: usize) -> Result<()> {
    if mu > 0.0 && mu < dim as f64 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "Riesz order mu = {mu} must lie in (0, {dim})"
        )))
    }
}

/// Multiplies a spectrum by `|xi|^(mu - n)` with the zero mode removed.
pub(crate) fn riesz_in_place(grid: &GridSpec, data: &mut [Complex64], mu: f64) {
    let tables = grid.tables();
    let power = 0.5 * (mu - grid.dim as f64);
    for (z, &k2) in data.iter_mut().zip(&tables.xi_sq) {
        if k2 == 0.0 {
            *z = Complex64::default();
        } else {
            *z *= k2.powf(power);
        }
    }
}

/// Fourier multiplier `|xi|^(mu - n)`, zero mode set to zero.
pub fn riesz_potential(f: &ComplexField, mu: f64) -> Result<ComplexField> {
    check_riesz_order(mu, f.grid().dim)?;
    let grid = *f.grid();
    let mut data = spectrum(f);
    riesz_in_place(&grid, &mut data, mu);
    Ok(from_spectrum(grid, data))
}

/// Multiplies a spectrum by `exp(-i t |xi|^2 / 2)`.
pub(crate) fn propagate_in_place(grid: &GridSpec, data: &mut [Complex64], t: f64) {
    if t == 0.0 {
        return;
    }
    let tables = grid.tables();
    for (z, &k2) in data.iter_mut().zip(&tables.xi_sq) {
        *z *= Complex64::from_polar(1.0, -0.5 * t * k2);
    }
}

/// Free Schrödinger group `exp(i t Laplacian / 2)`.
pub fn free_propagator(f: &ComplexField, t: f64) -> ComplexField {
    let grid = *f.grid();
    let mut data = spectrum(f);
    propagate_in_place(&grid, &mut data, t);
    from_spectrum(grid, data)
}

/// Zeroes every slot outside the two-thirds band.
pub(crate) fn truncate_in_place(grid: &GridSpec, data: &mut [Complex64]) {
    let tables = grid.tables();
    for (z, &keep) in data.iter_mut().zip(&tables.keep) {
        if !keep {
            *z = Complex64::default();
        }
    }
}

pub fn dealias(f: &ComplexField) -> ComplexField {
    let grid = *f.grid();
    let mut data = spectrum(f);
    truncate_in_place(&grid, &mut data);
    from_spectrum(grid, data)
}

pub fn dealias_real(f: &RealField) -> RealField {
    let grid = *f.grid();
    let mut data = real_spectrum(f);
    truncate_in_place(&grid, &mut data);
    real_from_spectrum(grid, data)
}

/// True when no spectral content lies outside the two-thirds band.
pub fn is_band_limited(f: &ComplexField, tol: f64) -> bool {
    let grid = *f.grid();
    let tables = grid.tables();
    let data = spectrum(f);
    let scale = data.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    data.iter()
        .zip(&tables.keep)
        .all(|(z, &keep)| keep || z.norm() <= tol * scale.max(f64::MIN_POSITIVE))
}

/// Symbol of `d^alpha`, i.e. `prod (i xi_j)^alpha_j`.
pub(crate) fn derivative_symbol(tables: &Tables, alpha: &[usize], flat: usize) -> Complex64 {
    let mut m = Complex64::new(1.0, 0.0);
    for (axis, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let k = if a % 2 == 1 {
            tables.xi_odd[axis][flat]
        } else {
            tables.xi[axis][flat]
        };
        m *= (I * k).powu(a as u32);
    }
    m
}

pub fn partial_derivative(f: &ComplexField, alpha: &[usize]) -> Result<ComplexField> {
    let grid = *f.grid();
    if alpha.len() != grid.dim {
        return Err(Error::Parameter(format!(
            "multi-index of length {} for dimension {}",
            alpha.len(),
            grid.dim
        )));
    }
    let tables = grid.tables();
    let mut data = spectrum(f);
    for (flat, z) in data.iter_mut().enumerate() {
        *z *= derivative_symbol(&tables, alpha, flat);
    }
    Ok(from_spectrum(grid, data))
}

pub fn laplacian(f: &ComplexField) -> ComplexField {
    let grid = *f.grid();
    let tables = grid.tables();
    let mut data = spectrum(f);
    for (z, &k2) in data.iter_mut().zip(&tables.xi_sq) {
        *z *= -k2;
    }
    from_spectrum(grid, data)
}

/// Spectral gradient of a real scalar.
pub fn gradient(phi: &RealField) -> VectorField {
    let grid = *phi.grid();
    let data = real_spectrum(phi);
    gradient_from_spectrum(&grid, &data)
}

pub(crate) fn gradient_from_spectrum(grid: &GridSpec, data: &[Complex64]) -> VectorField {
    let tables = grid.tables();
    // two real components per complex transform
    let mut comps: Vec<RealField> = Vec::with_capacity(grid.dim);
    let mut axis = 0;
    while axis < grid.dim {
        let a = axis;
        let b = (axis + 1 < grid.dim).then_some(axis + 1);
        let mut buf: Vec<Complex64> = data
            .iter()
            .enumerate()
            .map(|(flat, &z)| {
                let mut v = I * tables.xi_odd[a][flat] * z;
                if let Some(b) = b {
                    v += I * (I * tables.xi_odd[b][flat] * z);
                }
                v
            })
            .collect();
        fft::inverse(grid, &mut buf);
        comps.push(RealField::from_vec(
            *grid,
            buf.iter().map(|z| z.re).collect(),
        ));
        if b.is_some() {
            comps.push(RealField::from_vec(
                *grid,
                buf.iter().map(|z| z.im).collect(),
            ));
        }
        axis += 2;
    }
    VectorField::new(*grid, comps).expect("gradient components share the grid")
}

/// Transforms real fields two at a time by packing them as `a + i b`.
pub(crate) fn real_spectra(fields: &[&RealField]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(fields.len());
    let mut i = 0;
    while i < fields.len() {
        let grid = *fields[i].grid();
        if i + 1 < fields.len() {
            let mut buf: Vec<Complex64> = fields[i]
                .values()
                .iter()
                .zip(fields[i + 1].values())
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect();
            fft::forward(&grid, &mut buf);
            let (sa, sb) = unpack_pair(&grid, &buf);
            out.push(sa);
            out.push(sb);
            i += 2;
        } else {
            out.push(real_spectrum(fields[i]));
            i += 1;
        }
    }
    out
}

/// Splits the spectrum of `a + i b` into the spectra of `a` and `b`.
fn unpack_pair(grid: &GridSpec, packed: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let len = packed.len();
    let mut a = vec![Complex64::default(); len];
    let mut b = vec![Complex64::default(); len];
    let mut idx = vec![0usize; grid.dim];
    for flat in 0..len {
        grid.unravel(flat, &mut idx);
        for j in idx.iter_mut() {
            *j = (grid.points - *j) % grid.points;
        }
        let mirror = packed[grid.ravel(&idx)].conj();
        let z = packed[flat];
        a[flat] = 0.5 * (z + mirror);
        b[flat] = -0.5 * I * (z - mirror);
    }
    (a, b)
}

/// Inverse transforms of spectra known to come from real fields.
pub(crate) fn real_fields_from_spectra(
    grid: &GridSpec,
    spectra: Vec<Vec<Complex64>>,
) -> Vec<RealField> {
    let mut out = Vec::with_capacity(spectra.len());
    let mut iter = spectra.into_iter();
    while let Some(a) = iter.next() {
        match iter.next() {
            Some(b) => {
                let mut buf: Vec<Complex64> = a.iter().zip(&b).map(|(&x, &y)| x + I * y).collect();
                fft::inverse(grid, &mut buf);
                out.push(RealField::from_vec(
                    *grid,
                    buf.iter().map(|z| z.re).collect(),
                ));
                out.push(RealField::from_vec(
                    *grid,
                    buf.iter().map(|z| z.im).collect(),
                ));
            }
            None => out.push(real_from_spectrum(*grid, a)),
        }
    }
    out
}

pub fn divergence(s: &VectorField) -> RealField {
    let grid = *s.grid();
    let tables = grid.tables();
    let comps: Vec<&RealField> = s.components().iter().collect();
    let spectra = real_spectra(&comps);
    let mut acc = vec![Complex64::default(); grid.len()];
    for (axis, sp) in spectra.iter().enumerate() {
        for (flat, (a, z)) in acc.iter_mut().zip(sp).enumerate() {
            *a += I * tables.xi_odd[axis][flat] * z;
        }
    }
    real_from_spectrum(grid, acc)
}

/// All multi-indices of total order `order` in `dim` variables.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(dim, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> GridSpec {
        GridSpec::new(3, 16, 8.0).unwrap()
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(3, 0).len(), 1);
        assert_eq!(multi_indices(3, 1).len(), 3);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(3, 3).len(), 10);
        assert_eq!(multi_indices(1, 4), vec![vec![4]]);
    }

    #[test]
    fn packed_real_transforms_match_single() {
        let g = grid3();
        let a = RealField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp());
        let b = RealField::from_fn(g, |x| (x[2] * 0.3).sin() * (-(x[0] * x[0]) / 3.0).exp());
        let c = RealField::from_fn(g, |x| x[1].cos());
        let packed = real_spectra(&[&a, &b, &c]);
        for (sp, f) in packed.iter().zip([&a, &b, &c]) {
            let single = real_spectrum(f);
            for (x, y) in sp.iter().zip(&single) {
                assert!((x - y).norm() < 1e-11);
            }
        }
        let back = real_fields_from_spectra(&g, packed);
        for (r, f) in back.iter().zip([&a, &b, &c]) {
            for (x, y) in r.values().iter().zip(f.values()) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn riesz_rejects_bad_order() {
        let f = ComplexField::zeros(grid3());
        assert!(riesz_potential(&f, 0.0).is_err());
        assert!(riesz_potential(&f, 3.0).is_err());
        assert!(riesz_potential(&f, 1.0).is_ok());
    }

    #[test]
    fn nonfinite_symbol_rejected() {
        let f = ComplexField::zeros(grid3());
        let r = apply_multiplier(&f, |xi| {
            let k2: f64 = xi.iter().map(|k| k * k).sum();
            Complex64::new(1.0 / k2, 0.0)
        });
        assert!(matches!(r, Err(Error::Parameter(_))));
    }
}

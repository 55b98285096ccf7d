//! Flat binary field files.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `b"DLRDFLD1"` |
//! | 4     | `u32` dimension n |
//! | 4     | `u32` points per axis N |
//! | 8     | `f64` half width L |
//! | 4     | `u32` kind: 0 real, 1 complex, 2 vector |
//! | 4     | `u32` component count (1, 1, n) |
//!
//! followed by the payload in row-major node order (last axis fastest):
//! real fields as one `f64` per node, complex fields as `(re, im)` pairs,
//! vector fields component after component.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{ComplexField, GridSpec, RealField, VectorField};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DLRDFLD1";

#[derive(Clone, Debug, PartialEq)]
pub enum StoredField {
    Real(RealField),
    Complex(ComplexField),
    Vector(VectorField),
}

impl StoredField {
    fn kind(&self) -> u32 {
        match self {
            StoredField::Real(_) => 0,
            StoredField::Complex(_) => 1,
            StoredField::Vector(_) => 2,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            StoredField::Real(f) => f.grid(),
            StoredField::Complex(f) => f.grid(),
            StoredField::Vector(f) => f.grid(),
        }
    }
}

pub fn write_field<W: Write>(out: &mut W, field: &StoredField) -> Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.dim as u32).to_le_bytes())?;
    out.write_all(&(grid.points as u32).to_le_bytes())?;
    out.write_all(&grid.half_width.to_le_bytes())?;
    out.write_all(&field.kind().to_le_bytes())?;
    let comps = match field {
        StoredField::Vector(v) => v.components().len() as u32,
        _ => 1,
    };
    out.write_all(&comps.to_le_bytes())?;
    let mut buf = Vec::with_capacity(grid.len() * 16);
    match field {
        StoredField::Real(f) => f.values().iter().for_each(|v| buf.extend(v.to_le_bytes())),
        StoredField::Complex(f) => f.values().iter().for_each(|z| {
            buf.extend(z.re.to_le_bytes());
            buf.extend(z.im.to_le_bytes());
        }),
        StoredField::Vector(f) => f
            .components()
            .iter()
            .flat_map(|c| c.values())
            .for_each(|v| buf.extend(v.to_le_bytes())),
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(inp: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    inp.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(inp: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; count * 8];
    inp.read_exact(&mut raw)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_field<R: Read>(inp: &mut R) -> Result<StoredField> {
    let mut magic = [0u8; 8];
    inp.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let dim = read_u32(inp)? as usize;
    let points = read_u32(inp)? as usize;
    let half_width = read_f64s(inp, 1)?[0];
    let grid = GridSpec::new(dim, points, half_width)?;
    let kind = read_u32(inp)?;
    let comps = read_u32(inp)? as usize;
    let len = grid.len();
    match (kind, comps) {
        (0, 1) => Ok(StoredField::Real(RealField::new(
            grid,
            read_f64s(inp, len)?,
        )?)),
        (1, 1) => {
            let raw = read_f64s(inp, 2 * len)?;
            let values = raw
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            Ok(StoredField::Complex(ComplexField::new(grid, values)?))
        }
        (2, c) if c == dim => {
            let components = (0..c)
                .map(|_| RealField::new(grid, read_f64s(inp, len)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(StoredField::Vector(VectorField::new(grid, components)?))
        }
        _ => Err(Error::Format(format!(
            "unknown field kind {kind} with {comps} components"
        ))),
    }
}

/// Writes the line through the grid center along `axis` as CSV
/// with columns `x, re, im`.
pub fn write_axis_slice_csv<W: Write>(out: W, field: &ComplexField, axis: usize) -> Result<()> {
    let grid = field.grid();
    if axis >= grid.dim {
        return Err(Error::Parameter(format!("axis {axis} out of range")));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "re", "im"])?;
    let mut idx = vec![grid.points / 2; grid.dim];
    for j in 0..grid.points {
        idx[axis] = j;
        let z = field.values()[grid.ravel(&idx)];
        w.write_record([
            format!("{:e}", grid.coordinate(j)),
            format!("{:e}", z.re),
            format!("{:e}", z.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"NOTAFILE................................".to_vec();
        assert!(matches!(
            read_field(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn header_layout() {
        let grid = GridSpec::new(2, 8, 3.0).unwrap();
        let f = StoredField::Real(RealField::zeros(grid));
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 32 + 8 * 64);
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 3.0);
    }

    #[test]
    fn slice_csv_has_one_row_per_point() {
        let grid = GridSpec::new(3, 8, 2.0).unwrap();
        let f = ComplexField::from_fn(grid, |x| Complex64::new(x[0], x[1]));
        let mut buf = Vec::new();
        write_axis_slice_csv(&mut buf, &f, 0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("x,re,im"));
    }
}

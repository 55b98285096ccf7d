use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform periodic grid on the cube `[-L, L)^n` with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        let grid = GridSpec {
            dim,
            points,
            half_width,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Parameter("grid dimension must be at least 1".into()));
        }
        if self.points < 8 || !self.points.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "points per axis must be a power of two >= 8, got {}",
                self.points
            )));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::Parameter(format!(
                "half width must be positive, got {}",
                self.half_width
            )));
        }
        if (self.points as f64).powi(self.dim as i32) > 2f64.powi(28) {
            return Err(Error::Parameter("grid exceeds 2^28 nodes".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Physical coordinate of node `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Signed integer mode of FFT slot `m`, in `{-N/2, ..., N/2 - 1}`.
    pub fn mode(&self, m: usize) -> i64 {
        let n = self.points as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    pub fn wavenumber(&self, m: usize) -> f64 {
        self.mode(m) as f64 * PI / self.half_width
    }

    /// Largest retained |mode| under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> i64 {
        ((self.points as i64) - 1) / 3
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.points;
            flat /= self.points;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of every node, row-major with the last axis fastest.
    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let mut idx = vec![0usize; self.dim];
        (0..self.len()).map(move |flat| {
            self.unravel(flat, &mut idx);
            idx.iter().map(|&j| self.coordinate(j)).collect()
        })
    }

    pub(crate) fn tables(&self) -> Rc<Tables> {
        TABLES.with(|cache| {
            let key = (self.dim, self.points, self.half_width.to_bits());
            cache
                .borrow_mut()
                .entry(key)
                .or_insert_with(|| Rc::new(Tables::build(self)))
                .clone()
        })
    }

    pub fn same_as(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Per-grid lookup arrays indexed by flat spectral slot.
pub(crate) struct Tables {
    /// `xi[axis][flat]`
    pub xi: Vec<Vec<f64>>,
    pub xi_sq: Vec<f64>,
    /// Two-thirds rule mask.
    pub keep: Vec<bool>,
    /// Odd-order derivative symbols with the Nyquist slot removed.
    pub xi_odd: Vec<Vec<f64>>,
}

impl Tables {
    fn build(grid: &GridSpec) -> Self {
        let len = grid.len();
        let cut = grid.dealias_cutoff();
        let mut xi = vec![vec![0.0; len]; grid.dim];
        let mut xi_odd = vec![vec![0.0; len]; grid.dim];
        let mut xi_sq = vec![0.0; len];
        let mut keep = vec![true; len];
        let mut idx = vec![0usize; grid.dim];
        let nyquist = -(grid.points as i64) / 2;
        for flat in 0..len {
            grid.unravel(flat, &mut idx);
            for (axis, &m) in idx.iter().enumerate() {
                let k = grid.wavenumber(m);
                xi[axis][flat] = k;
                xi_odd[axis][flat] = if grid.mode(m) == nyquist { 0.0 } else { k };
                xi_sq[flat] += k * k;
                if grid.mode(m).abs() > cut {
                    keep[flat] = false;
                }
            }
        }
        Tables {
            xi,
            xi_sq,
            keep,
            xi_odd,
        }
    }
}

type TableKey = (usize, usize, u64);

thread_local! {
    static TABLES: RefCell<HashMap<TableKey, Rc<Tables>>> = RefCell::new(HashMap::new());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, 12, 16.0).is_err());
        assert!(GridSpec::new(3, 4, 16.0).is_err());
        assert!(GridSpec::new(0, 32, 16.0).is_err());
        assert!(GridSpec::new(3, 32, -1.0).is_err());
        assert!(GridSpec::new(3, 32, 16.0).is_ok());
    }

    #[test]
    fn modes_follow_fft_order() {
        let g = GridSpec::new(1, 8, PI).unwrap();
        let modes: Vec<i64> = (0..8).map(|m| g.mode(m)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.dealias_cutoff(), 2);
        assert_eq!(g.coordinate(4), 0.0);
    }

    #[test]
    fn ravel_roundtrip() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        let mut idx = [0; 3];
        for flat in [0, 7, 63, 300, 511] {
            g.unravel(flat, &mut idx);
            assert_eq!(g.ravel(&idx), flat);
        }
    }
}

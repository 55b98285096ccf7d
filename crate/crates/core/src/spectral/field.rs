use num_complex::Complex64;

use super::GridSpec;
use crate::{Error, Result};

/// Complex samples on every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

/// Real samples on every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    values: Vec<f64>,
}

/// `n` real components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    components: Vec<RealField>,
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len == grid.len() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{len} values for a grid of {} nodes",
            grid.len()
        )))
    }
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if values
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite("complex field".into()));
        }
        Ok(ComplexField { grid, values })
    }

    /// Skips the finiteness scan; length is still checked in debug builds.
    pub(crate) fn from_vec(grid: GridSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ComplexField { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ComplexField {
            values: vec![Complex64::default(); grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = grid.nodes().map(|x| f(&x)).collect();
        ComplexField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &ComplexField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        Ok(ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn modulus_squared(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    /// Pointwise multiplication by `exp(i theta)`.
    pub fn rotate(&self, theta: &RealField) -> Result<Self> {
        self.grid.same_as(&theta.grid)?;
        Ok(ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&theta.values)
                .map(|(&z, &a)| z * Complex64::from_polar(1.0, a))
                .collect(),
        })
    }

    pub fn real_part(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }
}

impl RealField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real field".into()));
        }
        Ok(RealField { grid, values })
    }

    pub(crate) fn from_vec(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RealField { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        RealField {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.nodes().map(|x| f(&x)).collect();
        RealField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        Ok(RealField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &RealField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl VectorField {
    pub fn new(grid: GridSpec, components: Vec<RealField>) -> Result<Self> {
        if components.len() != grid.dim {
            return Err(Error::GridMismatch(format!(
                "{} components for dimension {}",
                components.len(),
                grid.dim
            )));
        }
        for c in &components {
            grid.same_as(c.grid())?;
        }
        Ok(VectorField { grid, components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            components: (0..grid.dim).map(|_| RealField::zeros(grid)).collect(),
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> &[RealField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [RealField] {
        &mut self.components
    }

    pub fn component(&self, axis: usize) -> &RealField {
        &self.components[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(RealField::is_finite)
    }

    pub fn map_components(&self, f: impl Fn(&RealField) -> RealField) -> Self {
        VectorField {
            grid: self.grid,
            components: self.components.iter().map(f).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_components(|r| r.scaled(c))
    }

    pub fn zip_with(
        &self,
        other: &VectorField,
        f: impl Fn(f64, f64) -> f64 + Copy,
    ) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.zip_with(b, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField {
            grid: self.grid,
            components,
        })
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise Euclidean length squared.
    pub fn length_squared(&self) -> RealField {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (o, v) in out.iter_mut().zip(c.values()) {
                *o += v * v;
            }
        }
        RealField::from_vec(self.grid, out)
    }

    pub fn max_length(&self) -> f64 {
        self.length_squared()
            .values()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v))
            .sqrt()
    }
}

//! Model parameters, regularity admissibility and the Hartree functionals.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::ops::{
    check_riesz_order, propagate_in_place, riesz_in_place, spectrum, truncate_in_place,
};
use crate::spectral::{fft, ComplexField, RealField};
use crate::{Error, Result};

/// Coupling `lambda`, long-range exponent `gamma` and Riesz order `mu`
/// in dimension `dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl ModelParams {
    pub fn new(dim: usize, lambda: f64, gamma: f64, mu: f64) -> Result<Self> {
        let p = ModelParams {
            dim,
            lambda,
            gamma,
            mu,
        };
        p.check_solver()?;
        Ok(p)
    }

    /// Ranges accepted by the plain solver: `0 < mu < n`, `0 < gamma < 1`.
    pub fn check_solver(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Parameter("coupling must be finite".into()));
        }
        check_riesz_order(self.mu, self.dim)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Parameter(format!(
                "gamma = {} must lie in (0, 1)",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Ranges needed by the wave-operator constructions:
    /// `n >= 3`, `0 < mu <= n - 2`, `1/2 < gamma < 1`.
    pub fn check_scattering(&self) -> Result<()> {
        self.check_solver()?;
        if self.dim < 3 {
            return Err(Error::Unsupported(format!(
                "scattering needs dimension >= 3, got {}",
                self.dim
            )));
        }
        if self.mu > self.dim as f64 - 2.0 {
            return Err(Error::Unsupported(format!(
                "scattering needs mu <= n - 2, got mu = {}",
                self.mu
            )));
        }
        if self.gamma <= 0.5 {
            return Err(Error::Unsupported(format!(
                "gamma = {} <= 1/2 is outside the long-range regime handled here",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Regularity indices `(k, l)` for the amplitude and velocity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub k: usize,
    pub l: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissibilityClause {
    /// `k <= l`
    OrderedIndices,
    /// `l > n/2`
    VelocityAboveHalfDimension,
    /// `l + 2 + mu <= min(n/2 + 2k, n + k)`
    NonlinearBudget,
    /// `k > n/2` when `l + 2 + mu = n + k`
    EndpointNeedsLargeK,
    /// `n/2 + 3 + mu < min(n/2 + 2k, n + k)` for even `n`
    EvenDimensionMargin,
}

impl fmt::Display for AdmissibilityClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AdmissibilityClause::OrderedIndices => "k <= l",
            AdmissibilityClause::VelocityAboveHalfDimension => "l > n/2",
            AdmissibilityClause::NonlinearBudget => "l + 2 + mu <= min(n/2 + 2k, n + k)",
            AdmissibilityClause::EndpointNeedsLargeK => "k > n/2 when l + 2 + mu = n + k",
            AdmissibilityClause::EvenDimensionMargin => {
                "n/2 + 3 + mu < min(n/2 + 2k, n + k) for even n"
            }
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub violations: Vec<AdmissibilityClause>,
}

impl Admissibility {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

const CLAUSE_EPS: f64 = 1e-12;

pub fn check_admissible(dim: usize, mu: f64, k: usize, l: usize) -> Result<Admissibility> {
    check_riesz_order(mu, dim)?;
    let n = dim as f64;
    let (kf, lf) = (k as f64, l as f64);
    let budget = (n / 2.0 + 2.0 * kf).min(n + kf);
    let mut violations = Vec::new();
    if k > l {
        violations.push(AdmissibilityClause::OrderedIndices);
    }
    if lf <= n / 2.0 {
        violations.push(AdmissibilityClause::VelocityAboveHalfDimension);
    }
    let lhs = lf + 2.0 + mu;
    if lhs > budget + CLAUSE_EPS {
        violations.push(AdmissibilityClause::NonlinearBudget);
    }
    if (lhs - (n + kf)).abs() <= CLAUSE_EPS && kf <= n / 2.0 {
        violations.push(AdmissibilityClause::EndpointNeedsLargeK);
    }
    if dim.is_multiple_of(2) && n / 2.0 + 3.0 + mu >= budget - CLAUSE_EPS {
        violations.push(AdmissibilityClause::EvenDimensionMargin);
    }
    Ok(Admissibility { violations })
}

impl AdmissiblePair {
    /// Builds the pair, refusing it with every violated clause named.
    pub fn new(dim: usize, mu: f64, k: usize, l: usize) -> Result<Self> {
        let a = check_admissible(dim, mu, k, l)?;
        if a.is_admissible() {
            return Ok(AdmissiblePair { k, l });
        }
        let names: Vec<String> = a.violations.iter().map(|c| c.to_string()).collect();
        Err(Error::Parameter(format!(
            "(k, l) = ({k}, {l}) is not admissible for n = {dim}, mu = {mu}: violates {}",
            names.join("; ")
        )))
    }
}

/// `lambda Re |xi|^(mu-n) (w1 conj(w2))` with the product truncated to the
/// two-thirds band.
pub fn g0(w1: &ComplexField, w2: &ComplexField, params: &ModelParams) -> Result<RealField> {
    w1.grid().same_as(w2.grid())?;
    check_dimension(w1, params)?;
    let grid = *w1.grid();
    let mut data: Vec<Complex64> = w1
        .values()
        .iter()
        .zip(w2.values())
        .map(|(a, b)| a * b.conj())
        .collect();
    fft::forward(&grid, &mut data);
    Ok(potential_from_product_spectrum(&grid, data, params))
}

pub(crate) fn potential_from_product_spectrum(
    grid: &crate::spectral::GridSpec,
    mut data: Vec<Complex64>,
    params: &ModelParams,
) -> RealField {
    truncate_in_place(grid, &mut data);
    riesz_in_place(grid, &mut data, params.mu);
    fft::inverse(grid, &mut data);
    RealField::from_vec(*grid, data.iter().map(|z| params.lambda * z.re).collect())
}

fn check_dimension(w: &ComplexField, params: &ModelParams) -> Result<()> {
    if w.grid().dim != params.dim {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} but model dimension {}",
            w.grid().dim,
            params.dim
        )));
    }
    Ok(())
}

/// `exp(i |xi|^2 / 2t)` applied to `w`, i.e. the inverse free flow at time `1/t`.
pub fn half_propagate_back(w: &ComplexField, t: f64) -> Result<ComplexField> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    let grid = *w.grid();
    let mut data = spectrum(w);
    propagate_in_place(&grid, &mut data, -1.0 / t);
    fft::inverse(&grid, &mut data);
    ComplexField::new(grid, data)
}

/// `g0` evaluated on the back-propagated field at time `t`.
pub fn g_diag(w: &ComplexField, t: f64, params: &ModelParams) -> Result<RealField> {
    let y = half_propagate_back(w, t)?;
    g0(&y, &y, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pair_is_admissible() {
        assert!(check_admissible(3, 1.0, 2, 2).unwrap().is_admissible());
        assert!(check_admissible(3, 1.0, 3, 3).unwrap().is_admissible());
    }

    #[test]
    fn low_velocity_index_names_clause() {
        let a = check_admissible(3, 1.0, 2, 1).unwrap();
        assert!(a
            .violations
            .contains(&AdmissibilityClause::VelocityAboveHalfDimension));
        let err = AdmissiblePair::new(3, 1.0, 2, 1).unwrap_err().to_string();
        assert!(err.contains("l > n/2"), "{err}");
    }

    #[test]
    fn large_mu_with_unequal_indices_fails() {
        for (n, mu) in [(3usize, 1.5), (4, 2.5), (5, 3.2)] {
            for k in 0..8 {
                for l in 0..8 {
                    if k != l {
                        assert!(!check_admissible(n, mu, k, l).unwrap().is_admissible());
                    }
                }
            }
        }
    }

    #[test]
    fn mu_out_of_range_is_error() {
        assert!(check_admissible(3, 3.0, 2, 2).is_err());
        assert!(check_admissible(3, 0.0, 2, 2).is_err());
    }

    #[test]
    fn scattering_ranges() {
        assert!(ModelParams::new(3, 1.0, 0.8, 1.0)
            .unwrap()
            .check_scattering()
            .is_ok());
        assert!(ModelParams::new(3, 1.0, 0.4, 1.0)
            .unwrap()
            .check_scattering()
            .is_err());
        assert!(ModelParams::new(3, 1.0, 0.8, 1.5)
            .unwrap()
            .check_scattering()
            .is_err());
        assert!(ModelParams::new(2, 1.0, 0.8, 0.5)
            .unwrap()
            .check_scattering()
            .is_err());
        assert!(ModelParams::new(3, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn nonpositive_time_rejected() {
        let grid = crate::spectral::GridSpec::new(3, 8, 2.0).unwrap();
        let p = ModelParams::new(3, 1.0, 0.8, 1.0).unwrap();
        let w = ComplexField::zeros(grid);
        assert!(g_diag(&w, 0.0, &p).is_err());
        assert!(g_diag(&w, -1.0, &p).is_err());
    }
}

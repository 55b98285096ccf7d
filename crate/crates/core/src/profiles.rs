//! Free asymptotic dynamics built from the asymptotic state: the Dollard
//! phases `phi02`, `phi0`, their gradients `s02`, `s0`, and the tails that
//! convert between them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{g0, g_diag, ModelParams};
use crate::spectral::norms::{l2_norm, real_l2_norm};
use crate::spectral::ops::spectrum;
use crate::spectral::{
    gradient, sobolev_norm, x_norm, ComplexField, GridSpec, RealField, VectorField,
};
use crate::{Error, Result};

/// Scattering data `(w+, phi02(1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticDatum {
    pub w_plus: ComplexField,
    pub phi02_at_1: RealField,
}

impl AsymptoticDatum {
    pub fn new(w_plus: ComplexField, phi02_at_1: RealField) -> Result<Self> {
        w_plus.grid().same_as(phi02_at_1.grid())?;
        Ok(AsymptoticDatum { w_plus, phi02_at_1 })
    }

    /// Datum with `phi02(1) = 0`.
    pub fn from_w_plus(w_plus: ComplexField) -> Self {
        let phi = RealField::zeros(*w_plus.grid());
        AsymptoticDatum {
            w_plus,
            phi02_at_1: phi,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.w_plus.grid()
    }

    pub fn s02_at_1(&self) -> VectorField {
        gradient(&self.phi02_at_1)
    }

    /// `a = |w+|_{k+1}`
    pub fn a_norm(&self, k: usize) -> f64 {
        sobolev_norm(&self.w_plus, k + 1)
    }

    /// `b = sup_t |t^(gamma-1) s02(t)|` in the velocity norm of order `l + 1`.
    ///
    /// `t^(gamma-1) s02(t)` is a convex combination of `s02(1)` and
    /// `grad g0 / (1 - gamma)`, so the supremum sits at an endpoint.
    pub fn b_norm(&self, params: &ModelParams, l: usize) -> Result<f64> {
        check_gamma(params)?;
        let drift = gradient(&g0(&self.w_plus, &self.w_plus, params)?);
        Ok(x_norm(&self.s02_at_1(), l + 1).max(x_norm(&drift, l + 1) / (1.0 - params.gamma)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Absolute L2 tolerance for panel refinement and for the dropped tail.
    pub tol: f64,
    pub max_doublings: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            tol: 1e-8,
            max_doublings: 12,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Parameter(format!(
                "quadrature tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

fn check_gamma(params: &ModelParams) -> Result<()> {
    if params.gamma == 1.0 {
        return Err(Error::Unsupported(
            "gamma = 1 needs logarithmic phase formulas".into(),
        ));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("time must be positive, got {t}")))
    }
}

/// `int_1^t tau^-gamma dtau = (t^(1-gamma) - 1) / (1 - gamma)`
pub fn dollard_weight(t: f64, gamma: f64) -> f64 {
    (t.powf(1.0 - gamma) - 1.0) / (1.0 - gamma)
}

/// `phi02(t) = phi02(1) + (1-gamma)^-1 (t^(1-gamma) - 1) g0(w+, w+)`
pub fn phi02_of_t(datum: &AsymptoticDatum, t: f64, params: &ModelParams) -> Result<RealField> {
    check_gamma(params)?;
    check_time(t)?;
    let g = g0(&datum.w_plus, &datum.w_plus, params)?;
    datum
        .phi02_at_1
        .add(&g.scaled(dollard_weight(t, params.gamma)))
}

/// `s02(t) = s02(1) + (1-gamma)^-1 (t^(1-gamma) - 1) grad g0(w+, w+)`
pub fn s02_of_t(datum: &AsymptoticDatum, t: f64, params: &ModelParams) -> Result<VectorField> {
    check_gamma(params)?;
    check_time(t)?;
    let g = g0(&datum.w_plus, &datum.w_plus, params)?;
    datum
        .s02_at_1()
        .add(&gradient(&g).scaled(dollard_weight(t, params.gamma)))
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Panels evaluated together before their contributions are summed.
const PANEL_CHUNK: usize = 8;

/// Composite five-point Gauss-Legendre rule on `panels` geometric panels of `[a, b]`.
pub fn gauss_legendre_panels<F>(
    grid: &GridSpec,
    a: f64,
    b: f64,
    panels: usize,
    f: &F,
) -> Result<RealField>
where
    F: Fn(f64) -> Result<RealField> + Sync,
{
    let ratio = (b / a).powf(1.0 / panels as f64);
    let mut acc = vec![0.0; grid.len()];
    let mut start = 0;
    while start < panels {
        let end = (start + PANEL_CHUNK).min(panels);
        let nodes: Vec<(f64, f64)> = (start..end)
            .flat_map(|p| {
                let lo = a * ratio.powi(p as i32);
                let hi = if p + 1 == panels { b } else { lo * ratio };
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                GL_NODES
                    .iter()
                    .zip(GL_WEIGHTS)
                    .map(move |(x, wt)| (mid + half * x, half * wt))
            })
            .collect();
        let values: Vec<RealField> = nodes
            .par_iter()
            .map(|&(tau, _)| f(tau))
            .collect::<Result<_>>()?;
        for ((_, wt), v) in nodes.iter().zip(&values) {
            for (s, x) in acc.iter_mut().zip(v.values()) {
                *s += wt * x;
            }
        }
        start = end;
    }
    RealField::new(*grid, acc)
}

/// `int_a^b f(tau) dtau` by composite Gauss-Legendre on geometric panels.
/// The panel count doubles until successive results differ by less than
/// `quad.tol` in L2.
pub fn geometric_quadrature<F>(
    grid: &GridSpec,
    a: f64,
    b: f64,
    quad: &QuadratureConfig,
    f: F,
) -> Result<RealField>
where
    F: Fn(f64) -> Result<RealField> + Sync,
{
    quad.validate()?;
    check_time(a)?;
    check_time(b)?;
    if a == b {
        return Ok(RealField::zeros(*grid));
    }
    if b < a {
        return Ok(geometric_quadrature(grid, b, a, quad, f)?.scaled(-1.0));
    }
    let base = ((b / a).log2().ceil() as usize).max(1);
    let mut prev = gauss_legendre_panels(grid, a, b, base, &f)?;
    for level in 1..=quad.max_doublings {
        let next = gauss_legendre_panels(grid, a, b, base << level, &f)?;
        let change = real_l2_norm(&next.sub(&prev)?);
        if !change.is_finite() {
            return Err(Error::NonFinite(format!("quadrature on [{a}, {b}]")));
        }
        if change < quad.tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "no convergence on [{a:e}, {b:e}] after {} doublings",
        quad.max_doublings
    )))
}

/// `int_ta^tb tau^-gamma g0(U*(1/tau) w+) dtau`
pub fn free_phase_integral(
    w_plus: &ComplexField,
    ta: f64,
    tb: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<RealField> {
    geometric_quadrature(w_plus.grid(), ta, tb, quad, |tau| {
        Ok(g_diag(w_plus, tau, params)?.scaled(tau.powf(-params.gamma)))
    })
}

/// `phi0(t) = phi0(1) + int_1^t tau^-gamma g0(U*(1/tau) w+) dtau`
pub fn phi0_of_t(
    datum: &AsymptoticDatum,
    phi0_at_1: &RealField,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<RealField> {
    check_gamma(params)?;
    phi0_at_1.add(&free_phase_integral(&datum.w_plus, 1.0, t, params, quad)?)
}

/// `s0(t) = s0(1) + int_1^t tau^-gamma grad g0(U*(1/tau) w+) dtau`
pub fn s0_of_t(
    datum: &AsymptoticDatum,
    s0_at_1: &VectorField,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<VectorField> {
    check_gamma(params)?;
    s0_at_1.add(&gradient(&free_phase_integral(
        &datum.w_plus,
        1.0,
        t,
        params,
        quad,
    )?))
}

fn check_tail_gamma(params: &ModelParams) -> Result<()> {
    check_gamma(params)?;
    if params.gamma <= 0.5 {
        return Err(Error::Unsupported(format!(
            "phase tails need gamma > 1/2, got {}",
            params.gamma
        )));
    }
    Ok(())
}

/// Constant `C` in `|g0(U*(1/tau) w) - g0(w)|_2 <= C / tau` on the grid.
///
/// `|exp(i theta / tau) - 1| <= theta / tau` slotwise, the Riesz multiplier is
/// at most `(pi/L)^(mu-n)` on nonzero modes, and `|y + w|_inf` is bounded by
/// twice the Wiener norm of `w`.
fn tail_constant(w: &ComplexField, params: &ModelParams) -> f64 {
    let grid = w.grid();
    let tables = grid.tables();
    let data = spectrum(w);
    let len = grid.len() as f64;
    let mut theta = 0.0f64;
    let mut wiener = 0.0;
    for (z, &k2) in data.iter().zip(&tables.xi_sq) {
        if z.norm() > 0.0 {
            theta = theta.max(0.5 * k2);
        }
        wiener += z.norm() / len;
    }
    let riesz = (std::f64::consts::PI / grid.half_width).powf(params.mu - params.dim as f64);
    2.0 * params.lambda.abs() * riesz * l2_norm(w) * wiener * theta
}

/// Bound on `| int_T^inf tau^-gamma (g0(U*(1/tau) w+) - g0(w+)) dtau |_2`.
pub fn phase_tail_bound(w_plus: &ComplexField, t: f64, params: &ModelParams) -> f64 {
    tail_constant(w_plus, params) * t.powf(-params.gamma) / params.gamma
}

/// First time beyond which the dropped tail is below `tol`.
fn cutoff_time(w_plus: &ComplexField, t: f64, params: &ModelParams, tol: f64) -> f64 {
    let c = tail_constant(w_plus, params);
    if c == 0.0 {
        return t;
    }
    t.max((c / (params.gamma * tol)).powf(1.0 / params.gamma))
}

fn tail_integrand(
    w_plus: &ComplexField,
    g_inf: &RealField,
    tau: f64,
    params: &ModelParams,
) -> Result<RealField> {
    Ok(g_diag(w_plus, tau, params)?
        .sub(g_inf)?
        .scaled(tau.powf(-params.gamma)))
}

/// `-int_t^inf tau^-gamma (g0(U*(1/tau) w+) - g0(w+)) dtau` at every time
/// in `times`, returned in input order.
///
/// This is `phi0(t) - phi02(t)` when the two phases agree at infinity. The
/// largest time gets quadrature up to a cutoff plus a bounded tail; smaller
/// times add the intervals between consecutive times.
pub fn phase_tails(
    w_plus: &ComplexField,
    times: &[f64],
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Vec<RealField>> {
    check_tail_gamma(params)?;
    quad.validate()?;
    for &t in times {
        check_time(t)?;
    }
    let grid = *w_plus.grid();
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let g_inf = g0(w_plus, w_plus, params)?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut out = vec![RealField::zeros(grid); times.len()];

    let t_top = times[order[0]];
    let cut = cutoff_time(w_plus, t_top, params, quad.tol);
    let mut acc = geometric_quadrature(&grid, t_top, cut, quad, |tau| {
        tail_integrand(w_plus, &g_inf, tau, params)
    })?
    .scaled(-1.0);
    out[order[0]] = acc.clone();
    let mut prev = t_top;
    for &i in &order[1..] {
        let t = times[i];
        let piece = geometric_quadrature(&grid, t, prev, quad, |tau| {
            tail_integrand(w_plus, &g_inf, tau, params)
        })?;
        acc = acc.sub(&piece)?;
        out[i] = acc.clone();
        prev = t;
    }
    Ok(out)
}

/// `phi0(t) = phi02(t) - int_t^inf tau^-gamma (g0(U*(1/tau) w+) - g0(w+)) dtau`
pub fn phi0_from_phi02(
    datum: &AsymptoticDatum,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<RealField> {
    let tail = phase_tails(&datum.w_plus, &[t], params, quad)?.remove(0);
    phi02_of_t(datum, t, params)?.add(&tail)
}

/// `s0(t) - s02(t)` for phases matched at infinity.
pub fn s0_minus_s02_tail(
    datum: &AsymptoticDatum,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<VectorField> {
    let tail = phase_tails(&datum.w_plus, &[t], params, quad)?.remove(0);
    Ok(gradient(&tail))
}

/// `(phi02(t), phi0(t))` at each time, with `phi0` matched to `phi02` at infinity.
pub fn phase_pair_series(
    datum: &AsymptoticDatum,
    times: &[f64],
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Vec<(RealField, RealField)>> {
    let tails = phase_tails(&datum.w_plus, times, params, quad)?;
    times
        .iter()
        .zip(tails)
        .map(|(&t, tail)| {
            let p02 = phi02_of_t(datum, t, params)?;
            let p0 = p02.add(&tail)?;
            Ok((p02, p0))
        })
        .collect()
}

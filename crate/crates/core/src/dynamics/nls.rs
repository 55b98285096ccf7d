//! Direct split-step solver for `i v_t = -(2t^2)^-1 Lap v + t^-gamma g0(v, v) v`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AuxState, TrajectoryRecord};
use crate::model::{g0, half_propagate_back, ModelParams};
use crate::spectral::norms::l2_norm;
use crate::spectral::ops::spectrum;
use crate::spectral::{fft, ComplexField, GridSpec};
use crate::{Error, Result};

/// `v = exp(-i phi) U*(1/t) w`.
pub fn v_representation(state: &AuxState) -> Result<ComplexField> {
    let phi = state
        .phi
        .as_ref()
        .ok_or_else(|| Error::Parameter("state carries no phase".into()))?;
    let y = half_propagate_back(&state.w, state.t)?;
    y.rotate(&phi.scaled(-1.0))
}

fn linear_flow(grid: &GridSpec, data: &mut [Complex64], ta: f64, tb: f64) {
    let tables = grid.tables();
    let dtau = 1.0 / ta - 1.0 / tb;
    for (z, &k2) in data.iter_mut().zip(&tables.xi_sq) {
        *z *= Complex64::from_polar(1.0, -0.5 * dtau * k2);
    }
}

/// `int_a^b tau^-gamma dtau`
fn weight_integral(a: f64, b: f64, gamma: f64) -> f64 {
    (b.powf(1.0 - gamma) - a.powf(1.0 - gamma)) / (1.0 - gamma)
}

/// One Strang step from `t` to `t + dt`: half linear flow, exact phase
/// rotation by the frozen potential, half linear flow.
pub fn rescaled_nls_step(
    v: &ComplexField,
    t: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<ComplexField> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    let tb = t + dt;
    if !(tb > 0.0) {
        return Err(Error::Parameter(format!(
            "step leaves positive times: t + dt = {tb}"
        )));
    }
    let grid = *v.grid();
    let tm = 0.5 * (t + tb);
    let mut data = spectrum(v);
    linear_flow(&grid, &mut data, t, tm);
    fft::inverse(&grid, &mut data);
    let half = ComplexField::new(grid, data)?;
    let g = g0(&half, &half, params)?;
    let angle = weight_integral(t, tb, params.gamma);
    let rotated = half.rotate(&g.scaled(-angle))?;
    let mut data = spectrum(&rotated);
    linear_flow(&grid, &mut data, tm, tb);
    fft::inverse(&grid, &mut data);
    ComplexField::new(grid, data)
}

/// Evolves `v` from `ta` to `tb` with steps `|dt| <= rel_step * t`.
pub fn evolve_rescaled(
    v: &ComplexField,
    ta: f64,
    tb: f64,
    rel_step: f64,
    params: &ModelParams,
) -> Result<ComplexField> {
    if !(rel_step > 0.0) {
        return Err(Error::Parameter("relative step must be positive".into()));
    }
    let mut v = v.clone();
    let mut t = ta;
    let forward = tb >= ta;
    while (t - tb).abs() > 1e-13 * tb.abs() {
        let dt = rel_step * t;
        let dt = if forward {
            dt.min(tb - t)
        } else {
            (-dt).max(tb - t)
        };
        // keep the backward step away from t = 0
        let dt = if forward { dt } else { dt.max(-0.5 * t) };
        v = rescaled_nls_step(&v, t, dt, params)?;
        t = if (t + dt - tb).abs() <= 1e-13 * tb.abs() {
            tb
        } else {
            t + dt
        };
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeCrossCheck {
    pub times: Vec<f64>,
    /// `|| v_direct(t) - exp(-i phi(t)) U*(1/t) w(t) ||_2`
    pub discrepancy: Vec<f64>,
    pub mass: Vec<f64>,
}

impl GaugeCrossCheck {
    pub fn max_relative(&self) -> f64 {
        self.discrepancy
            .iter()
            .zip(&self.mass)
            .map(|(d, m)| if *m > 0.0 { d / m } else { *d })
            .fold(0.0, f64::max)
    }
}

/// Evolves the v-representation of the earliest snapshot directly and
/// compares it with the representation of every later snapshot.
pub fn cross_check_gauge(
    traj: &TrajectoryRecord,
    params: &ModelParams,
    rel_step: f64,
) -> Result<GaugeCrossCheck> {
    let snaps = &traj.snapshots;
    if snaps.is_empty() {
        return Err(Error::Parameter("trajectory kept no snapshots".into()));
    }
    let first = &snaps[0];
    let mut v = v_representation(first)?;
    let mut t = first.t;
    let mut out = GaugeCrossCheck {
        times: vec![t],
        discrepancy: vec![0.0],
        mass: vec![l2_norm(&first.w)],
    };
    for snap in &snaps[1..] {
        v = evolve_rescaled(&v, t, snap.t, rel_step, params)?;
        t = snap.t;
        let target = v_representation(snap)?;
        out.times.push(t);
        out.discrepancy.push(l2_norm(&v.sub(&target)?));
        out.mass.push(l2_norm(&snap.w));
    }
    Ok(out)
}

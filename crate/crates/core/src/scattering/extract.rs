//! Recovery of `w+`, `s0` and `s02` from a computed trajectory.

use crate::dynamics::{AuxState, TrajectoryRecord};
use crate::model::{g0, g_diag, ModelParams};
use crate::profiles::{dollard_weight, phase_tails, QuadratureConfig};
use crate::spectral::norms::sobolev_norm;
use crate::spectral::ops::dealias_real;
use crate::spectral::{gradient, x_norm, ComplexField, RealField, VectorField};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct WPlusEstimate {
    pub w_plus: ComplexField,
    pub t_max: f64,
    /// `|w(t_max) - w(t')|_{k-1}` for the sample `t'` closest to `t_max / 2`
    pub proxy: f64,
    /// Set when the proxy exceeds the requested tolerance.
    pub flagged: bool,
}

fn sorted_snapshots(traj: &TrajectoryRecord) -> Result<Vec<&AuxState>> {
    if traj.snapshots.is_empty() {
        return Err(Error::Parameter("trajectory kept no snapshots".into()));
    }
    let mut snaps: Vec<&AuxState> = traj.snapshots.iter().collect();
    snaps.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(snaps)
}

/// Snapshot closest to `t` in log-time, if `|ln(s.t / t)| < tol`.
fn near<'a>(snaps: &[&'a AuxState], t: f64, tol: f64) -> Option<&'a AuxState> {
    snaps
        .iter()
        .min_by(|a, b| (a.t / t).ln().abs().total_cmp(&(b.t / t).ln().abs()))
        .filter(|s| (s.t / t).ln().abs() < tol)
        .copied()
}

/// `w+` estimated by `w(t_max)`.
pub fn extract_w_plus(traj: &TrajectoryRecord, tol: Option<f64>) -> Result<WPlusEstimate> {
    let snaps = sorted_snapshots(traj)?;
    let last = snaps[snaps.len() - 1];
    let km1 = traj.pair.k.saturating_sub(1);
    // anywhere within a factor sqrt(2) of t_max / 2
    let half = near(&snaps, 0.5 * last.t, 0.5 * std::f64::consts::LN_2)
        .ok_or_else(|| Error::Parameter("no snapshot near t_max / 2".into()))?;
    let proxy = sobolev_norm(&last.w.sub(&half.w)?, km1);
    Ok(WPlusEstimate {
        w_plus: last.w.clone(),
        t_max: last.t,
        proxy,
        flagged: tol.map(|t| proxy > t).unwrap_or(false),
    })
}

/// `(t, |w(2t) - w(t)|_{k-1})` wherever the trajectory holds both times.
pub fn w_plus_proxy_series(traj: &TrajectoryRecord) -> Result<Vec<(f64, f64)>> {
    let snaps = sorted_snapshots(traj)?;
    let km1 = traj.pair.k.saturating_sub(1);
    let mut out = Vec::new();
    for s in &snaps {
        if let Some(d) = near(&snaps, 2.0 * s.t, 0.05) {
            if d.t > s.t {
                out.push((s.t, sobolev_norm(&d.w.sub(&s.w)?, km1)));
            }
        }
    }
    Ok(out)
}

/// `(s . grad) s` with products truncated to the two-thirds band.
pub fn convective_term(s: &VectorField) -> VectorField {
    let grid = *s.grid();
    let n = grid.dim;
    let grads: Vec<VectorField> = s.components().iter().map(gradient).collect();
    let comps = (0..n)
        .map(|j| {
            let mut acc = vec![0.0; grid.len()];
            for i in 0..n {
                let si = s.component(i).values();
                let dij = grads[j].component(i).values();
                for ((a, x), y) in acc.iter_mut().zip(si).zip(dij) {
                    *a += x * y;
                }
            }
            dealias_real(&RealField::from_vec(grid, acc))
        })
        .collect();
    VectorField::new(grid, comps).expect("one component per axis")
}

/// Velocity fields at the trajectory's sample times.
#[derive(Clone, Debug)]
pub struct VelocitySeries {
    pub times: Vec<f64>,
    pub fields: Vec<VectorField>,
    /// Estimated contribution beyond the last sample time.
    pub tail: VectorField,
    /// `|tail|` in the velocity norm of order `l - 1`.
    pub tail_norm: f64,
}

/// Weights `c_i` with `int_{u[j]}^{u[j+1]} p(u) du = sum_i c_i p(u[i0 + i])`
/// for the cubic through four neighbouring nodes.
fn interval_weights(u: &[f64], j: usize) -> (usize, Vec<f64>) {
    let m = u.len();
    let width = m.min(4);
    let i0 = j.saturating_sub(1).min(m - width);
    let nodes = &u[i0..i0 + width];
    let (a, b) = (u[j], u[j + 1]);
    let gl = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    let mut c = vec![0.0; width];
    for (x, wt) in gl {
        let u_q = 0.5 * (a + b) + 0.5 * (b - a) * x;
        for (i, ci) in c.iter_mut().enumerate() {
            let mut l = 1.0;
            for (k, &uk) in nodes.iter().enumerate() {
                if k != i {
                    l *= (u_q - uk) / (nodes[i] - uk);
                }
            }
            *ci += 0.5 * (b - a) * wt * l;
        }
    }
    (i0, c)
}

/// `int_{t_j}^{t_last} f dt` at every sample, from values of `f` at the samples.
fn cumulative_to_end(times: &[f64], values: &[VectorField]) -> Result<Vec<VectorField>> {
    let m = times.len();
    let grid = *values[0].grid();
    let u: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    // integrate t f(t) in u = ln t
    let g: Vec<VectorField> = values
        .iter()
        .zip(times)
        .map(|(v, &t)| v.scaled(t))
        .collect();
    let mut out = vec![VectorField::zeros(grid); m];
    for j in (0..m - 1).rev() {
        let (i0, c) = interval_weights(&u, j);
        let mut piece = out[j + 1].clone();
        for (i, ci) in c.iter().enumerate() {
            piece = piece.add(&g[i0 + i].scaled(*ci))?;
        }
        out[j] = piece;
    }
    Ok(out)
}

fn check_gamma(params: &ModelParams) -> Result<()> {
    if !(params.gamma > 0.5 && params.gamma < 1.0) {
        return Err(Error::Unsupported(format!(
            "extraction needs 1/2 < gamma < 1, got {}",
            params.gamma
        )));
    }
    Ok(())
}

/// `s0(t) = s(t) + int_t^inf [tau^-2 (s.grad)s + tau^-gamma grad(g0(U*(1/tau) w) - g0(U*(1/tau) w+))] dtau`.
///
/// The integral runs over the trajectory's samples; beyond the last sample
/// the integrand is continued as `tau^(-2 gamma)`.
pub fn extract_s0(
    traj: &TrajectoryRecord,
    w_plus: &ComplexField,
    params: &ModelParams,
) -> Result<VelocitySeries> {
    check_gamma(params)?;
    let snaps = sorted_snapshots(traj)?;
    if snaps.len() < 2 {
        return Err(Error::Parameter(
            "extraction needs at least two snapshots".into(),
        ));
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let integrand: Vec<VectorField> = snaps
        .iter()
        .map(|s| {
            let t = s.t;
            let burgers = convective_term(&s.s).scaled(t.powi(-2));
            let dg = g_diag(&s.w, t, params)?.sub(&g_diag(w_plus, t, params)?)?;
            burgers.add(&gradient(&dg).scaled(t.powf(-params.gamma)))
        })
        .collect::<Result<_>>()?;
    let cumulative = cumulative_to_end(&times, &integrand)?;
    let t_last = times[times.len() - 1];
    let tail = integrand[integrand.len() - 1].scaled(t_last / (2.0 * params.gamma - 1.0));
    let fields = snaps
        .iter()
        .zip(&cumulative)
        .map(|(s, c)| s.s.add(c)?.add(&tail))
        .collect::<Result<_>>()?;
    Ok(VelocitySeries {
        tail_norm: x_norm(&tail, traj.pair.l.saturating_sub(1)),
        times,
        fields,
        tail,
    })
}

/// `s02(t) = s0(t) + int_t^inf tau^-gamma grad(g0(U*(1/tau) w+) - g0(w+)) dtau`.
pub fn extract_s02(
    traj: &TrajectoryRecord,
    w_plus: &ComplexField,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<VelocitySeries> {
    let s0 = extract_s0(traj, w_plus, params)?;
    let tails = phase_tails(w_plus, &s0.times, params, quad)?;
    let fields = s0
        .fields
        .iter()
        .zip(&tails)
        .map(|(f, tail)| f.sub(&gradient(tail)))
        .collect::<Result<_>>()?;
    Ok(VelocitySeries { fields, ..s0 })
}

/// `s02(1)` from the earliest sample: `s02(t) - (1-gamma)^-1 (t^(1-gamma) - 1) grad g0(w+)`.
pub fn extract_s02_at_1(
    traj: &TrajectoryRecord,
    w_plus: &ComplexField,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<(VectorField, VelocitySeries)> {
    let series = extract_s02(traj, w_plus, params, quad)?;
    let t = series.times[0];
    let drift = gradient(&g0(w_plus, w_plus, params)?);
    let s1 = series.fields[0].sub(&drift.scaled(dollard_weight(t, params.gamma)))?;
    Ok((s1, series))
}

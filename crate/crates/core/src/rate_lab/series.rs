//! Error series along a constructed solution.

use rayon::prelude::*;

use crate::dynamics::{AuxState, TrajectoryRecord};
use crate::model::{half_propagate_back, ModelParams};
use crate::profiles::{phase_pair_series, phi02_of_t, AsymptoticDatum, QuadratureConfig};
use crate::scattering::WaveOpRun;
use crate::spectral::norms::{delta_exponent, lr_norm, sobolev_norm};
use crate::spectral::{gradient, x_norm, ComplexField, RealField};
use crate::{Error, Result};

/// The two profile error series at the limit trajectory's sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSeries {
    pub times: Vec<f64>,
    /// `|exp(i(phi02 - phi)) U*(1/t) w - w+|_k`
    pub phi02: Vec<f64>,
    /// `|exp(i(phi0 - phi)) U*(1/t) w - U*(1/t) w+|_k`; absent when `phi0` is undefined.
    pub phi0: Option<Vec<f64>>,
}

/// Everything measured along one limit trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    /// `|w(t) - w+|_k`
    pub w_plus_k: Vec<f64>,
    /// `|s(t) - s02(t)|_l`
    pub s02_l: Vec<f64>,
    /// `|s(t) - s0(t)|_l`
    pub s0_l: Option<Vec<f64>>,
    pub profile: ProfileSeries,
    /// `(r, t^-delta(r) |phi02 profile difference|_r)` for each requested `r`.
    pub lr: Vec<(f64, Vec<f64>)>,
}

fn check_lr_exponent(dim: usize, k: usize, r: f64) -> Result<()> {
    let half = dim as f64 / 2.0;
    let delta = delta_exponent(dim, r);
    let cap = (k as f64).min(half);
    let strict = k as f64 == half;
    let ok = r >= 2.0 && delta >= 0.0 && if strict { delta < cap } else { delta <= cap };
    if !ok {
        return Err(Error::Parameter(format!(
            "r = {r} gives delta = {delta}, outside [0, {cap}{}",
            if strict { ")" } else { "]" }
        )));
    }
    Ok(())
}

struct Phases {
    phi02: RealField,
    phi0: Option<RealField>,
}

fn phases_at(
    datum: &AsymptoticDatum,
    times: &[f64],
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<Vec<Phases>> {
    match phase_pair_series(datum, times, params, quad) {
        Ok(pairs) => Ok(pairs
            .into_iter()
            .map(|(phi02, phi0)| Phases {
                phi02,
                phi0: Some(phi0),
            })
            .collect()),
        Err(Error::Unsupported(_)) => times
            .iter()
            .map(|&t| {
                Ok(Phases {
                    phi02: phi02_of_t(datum, t, params)?,
                    phi0: None,
                })
            })
            .collect(),
        Err(e) => Err(e),
    }
}

struct Differences {
    d02: ComplexField,
    d0: Option<ComplexField>,
}

fn profile_differences(
    snap: &AuxState,
    datum: &AsymptoticDatum,
    ph: &Phases,
) -> Result<Differences> {
    let phi = snap
        .phi
        .as_ref()
        .ok_or_else(|| Error::Parameter("limit trajectory carries no phase".into()))?;
    let y = half_propagate_back(&snap.w, snap.t)?;
    let d02 = y.rotate(&ph.phi02.sub(phi)?)?.sub(&datum.w_plus)?;
    let d0 = match &ph.phi0 {
        Some(p0) => {
            let free = half_propagate_back(&datum.w_plus, snap.t)?;
            Some(y.rotate(&p0.sub(phi)?)?.sub(&free)?)
        }
        None => None,
    };
    Ok(Differences { d02, d0 })
}

struct Row {
    w: f64,
    s02: f64,
    s0: Option<f64>,
    p02: f64,
    p0: Option<f64>,
    lr: Vec<f64>,
}

/// All error series of a wave-operator run at its limit samples.
pub fn decay_series(
    run: &WaveOpRun,
    quad: &QuadratureConfig,
    lr_exponents: &[f64],
) -> Result<DecaySeries> {
    let params = &run.params;
    let (k, l) = (run.pair.k, run.pair.l);
    for &r in lr_exponents {
        check_lr_exponent(params.dim, k, r)?;
    }
    let snaps = &run.limit.snapshots;
    if snaps.is_empty() {
        return Err(Error::Parameter(
            "limit trajectory kept no snapshots".into(),
        ));
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let phases = phases_at(&run.datum, &times, params, quad)?;
    let rows: Vec<Row> = snaps
        .par_iter()
        .zip(&phases)
        .map(|(snap, ph)| {
            let t = snap.t;
            let diff = profile_differences(snap, &run.datum, ph)?;
            let s02 = gradient(&ph.phi02);
            let s0 = ph.phi0.as_ref().map(gradient);
            let lr = lr_exponents
                .iter()
                .map(|&r| Ok(lr_norm(&diff.d02, r)? * t.powf(-delta_exponent(params.dim, r))))
                .collect::<Result<_>>()?;
            Ok(Row {
                w: sobolev_norm(&snap.w.sub(&run.datum.w_plus)?, k),
                s02: x_norm(&snap.s.sub(&s02)?, l),
                s0: s0
                    .map(|s0| Ok::<_, Error>(x_norm(&snap.s.sub(&s0)?, l)))
                    .transpose()?,
                p02: sobolev_norm(&diff.d02, k),
                p0: diff.d0.as_ref().map(|d| sobolev_norm(d, k)),
                lr,
            })
        })
        .collect::<Result<_>>()?;
    let has_phi0 = rows.iter().all(|r| r.p0.is_some());
    Ok(DecaySeries {
        w_plus_k: rows.iter().map(|r| r.w).collect(),
        s02_l: rows.iter().map(|r| r.s02).collect(),
        s0_l: has_phi0.then(|| rows.iter().map(|r| r.s0.unwrap_or(f64::NAN)).collect()),
        profile: ProfileSeries {
            times: times.clone(),
            phi02: rows.iter().map(|r| r.p02).collect(),
            phi0: has_phi0.then(|| rows.iter().map(|r| r.p0.unwrap_or(f64::NAN)).collect()),
        },
        lr: lr_exponents
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, rows.iter().map(|row| row.lr[i]).collect()))
            .collect(),
        times,
    })
}

/// The two profile error series of a run.
pub fn profile_error_series(run: &WaveOpRun, quad: &QuadratureConfig) -> Result<ProfileSeries> {
    let params = &run.params;
    let snaps = &run.limit.snapshots;
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let phases = phases_at(&run.datum, &times, params, quad)?;
    let k = run.pair.k;
    let diffs: Vec<Differences> = snaps
        .par_iter()
        .zip(&phases)
        .map(|(s, ph)| profile_differences(s, &run.datum, ph))
        .collect::<Result<_>>()?;
    let phi0 = diffs
        .iter()
        .map(|d| d.d0.as_ref().map(|f| sobolev_norm(f, k)))
        .collect::<Option<Vec<f64>>>();
    Ok(ProfileSeries {
        phi02: diffs.iter().map(|d| sobolev_norm(&d.d02, k)).collect(),
        phi0,
        times,
    })
}

/// `t^-delta(r) |exp(i(phi02 - phi)) U*(1/t) w - w+|_r`, the physical `L^r`
/// profile error, at the limit samples.
pub fn lr_profile_errors(
    run: &WaveOpRun,
    r: f64,
    quad: &QuadratureConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_lr_exponent(run.params.dim, run.pair.k, r)?;
    let snaps = &run.limit.snapshots;
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let phases = phases_at(&run.datum, &times, &run.params, quad)?;
    let delta = delta_exponent(run.params.dim, r);
    let values = snaps
        .par_iter()
        .zip(&phases)
        .map(|(s, ph)| {
            let d = profile_differences(s, &run.datum, ph)?;
            Ok(lr_norm(&d.d02, r)? * s.t.powf(-delta))
        })
        .collect::<Result<_>>()?;
    Ok((times, values))
}

/// Copies the error series into the matching trajectory samples.
pub fn fill_error_columns(record: &mut TrajectoryRecord, series: &DecaySeries) {
    for sample in &mut record.samples {
        let Some(i) = series
            .times
            .iter()
            .position(|&t| (t - sample.t).abs() <= 1e-12 * t)
        else {
            continue;
        };
        sample.err_w_plus_k = Some(series.w_plus_k[i]);
        sample.err_s02_l = Some(series.s02_l[i]);
        sample.err_s0_l = series.s0_l.as_ref().map(|v| v[i]);
        sample.err_prof_phi02 = Some(series.profile.phi02[i]);
        sample.err_prof_phi0 = series.profile.phi0.as_ref().map(|v| v[i]);
    }
}

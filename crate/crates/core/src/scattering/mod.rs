//! Wave operators by seeding the auxiliary system at finite `t0` and letting
//! `t0` grow, extraction of asymptotic data from a trajectory, gauge
//! transformations, and the maps into the v-representation.

mod extract;
mod store;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    diagnose, evolve_rescaled, geometric_times, integrate_aux, v_representation, AuxState,
    IntegratorConfig, SampleDiagnostics, TrajectoryRecord,
};
use crate::model::{AdmissiblePair, ModelParams};
use crate::profiles::{phi02_of_t, s02_of_t, AsymptoticDatum, QuadratureConfig};
use crate::spectral::norms::{l2_norm, sobolev_norm};
use crate::spectral::{free_propagator, x_norm, ComplexField, RealField};
use crate::{Error, Result};

pub use extract::{
    convective_term, extract_s0, extract_s02, extract_s02_at_1, extract_w_plus,
    w_plus_proxy_series, VelocitySeries, WPlusEstimate,
};
pub use store::{read_differences_csv, write_differences_csv, DIFFERENCE_COLUMNS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveOpConfig {
    /// Increasing seed times `t0`.
    pub schedule: Vec<f64>,
    /// Start `T` of the comparison window; calibrated from the datum when absent.
    pub window_start: Option<f64>,
    /// End `T_max` of the comparison window.
    pub window_end: f64,
    /// Ratio between consecutive sample times in the window.
    pub sample_ratio: f64,
    /// Initial constant in the heuristic for `T`.
    pub calibration: f64,
    pub max_retries: u32,
    /// Extrapolate the last two seeds in `t0^-min(gamma, 1/2)`.
    pub richardson: bool,
    pub integrator: IntegratorConfig,
    pub quadrature: QuadratureConfig,
}

impl Default for WaveOpConfig {
    fn default() -> Self {
        WaveOpConfig {
            schedule: vec![100.0, 200.0, 400.0, 800.0],
            window_start: None,
            window_end: 1e4,
            sample_ratio: 2f64.powf(0.25),
            calibration: 1.0,
            max_retries: 4,
            richardson: false,
            integrator: IntegratorConfig::default(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl WaveOpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Parameter("seed schedule is empty".into()));
        }
        if self.schedule.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
            return Err(Error::Parameter(
                "seed times must be finite and >= 1".into(),
            ));
        }
        if self.schedule.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Parameter(
                "seed schedule must be strictly increasing".into(),
            ));
        }
        if let Some(t) = self.window_start {
            if !(t >= 1.0 && t < self.window_end) {
                return Err(Error::Parameter(format!(
                    "window start {t} must lie in [1, {})",
                    self.window_end
                )));
            }
        }
        if !(self.window_end.is_finite() && self.window_end > 1.0) {
            return Err(Error::Parameter("window end must exceed 1".into()));
        }
        if !(self.sample_ratio > 1.0) {
            return Err(Error::Parameter("sample ratio must exceed 1".into()));
        }
        if !(self.calibration > 0.0) {
            return Err(Error::Parameter(
                "calibration constant must be positive".into(),
            ));
        }
        self.integrator.validate()?;
        self.quadrature.validate()
    }
}

fn check_long_range(params: &ModelParams) -> Result<()> {
    params.check_scattering()?;
    if !(params.gamma > 0.5 && params.gamma < 1.0) {
        return Err(Error::Unsupported(format!(
            "the wave operator needs 1/2 < gamma < 1, got {}",
            params.gamma
        )));
    }
    Ok(())
}

/// `T = C (2 gamma - 1)^-2 max((b + a^2)^(1/gamma), a^4 b^-2)` with
/// `a = |w+|_{k+1}` and `b` the rescaled velocity bound.
pub fn heuristic_t(
    datum: &AsymptoticDatum,
    params: &ModelParams,
    pair: AdmissiblePair,
    c_cal: f64,
) -> Result<f64> {
    check_long_range(params)?;
    let a = datum.a_norm(pair.k);
    let b = datum.b_norm(params, pair.l)?;
    Ok(heuristic_t_from_norms(a, b, params.gamma, c_cal))
}

/// The formula for `T` on given `(a, b)`.
pub fn heuristic_t_from_norms(a: f64, b: f64, gamma: f64, c_cal: f64) -> f64 {
    let first = (b + a * a).powf(1.0 / gamma);
    let second = if a == 0.0 { 0.0 } else { a.powi(4) / (b * b) };
    c_cal * (2.0 * gamma - 1.0).powi(-2) * first.max(second)
}

/// `w(t0) = U(1/t0) w+`, `s(t0) = s02(t0)`, `phi(t0) = phi02(t0)`.
pub fn seed_at_t0(datum: &AsymptoticDatum, t0: f64, params: &ModelParams) -> Result<AuxState> {
    if !(t0 >= 1.0 && t0.is_finite()) {
        return Err(Error::Parameter(format!(
            "seed time must be >= 1, got {t0}"
        )));
    }
    let w = free_propagator(&datum.w_plus, 1.0 / t0);
    let s = s02_of_t(datum, t0, params)?;
    let phi = phi02_of_t(datum, t0, params)?;
    AuxState::new(t0, w, s, Some(phi))
}

/// Runs the seed at `t0` backward to the window start and forward to its end.
fn run_seed(
    datum: &AsymptoticDatum,
    t0: f64,
    times: &[f64],
    base: &IntegratorConfig,
    params: &ModelParams,
) -> Result<TrajectoryRecord> {
    let seed = seed_at_t0(datum, t0, params)?;
    let (lo, hi) = (times[0], times[times.len() - 1]);
    let cfg = |sel: Vec<f64>| IntegratorConfig {
        sample_times: sel,
        keep_snapshots: true,
        ..base.clone()
    };
    let below: Vec<f64> = times.iter().copied().filter(|&t| t <= t0).collect();
    let above: Vec<f64> = times.iter().copied().filter(|&t| t > t0).collect();
    let mut record: Option<TrajectoryRecord> = None;
    if !below.is_empty() {
        record = Some(integrate_aux(&seed, lo, &cfg(below), params)?);
    }
    if !above.is_empty() {
        let fwd = integrate_aux(&seed, hi, &cfg(above), params)?;
        record = Some(match record {
            Some(r) => r.merge(fwd),
            None => fwd,
        });
    }
    let record = record.expect("window holds at least one sample");
    if let Some(reason) = &record.failure {
        return Err(Error::Integration {
            t: t0,
            reason: format!("seed at t0 = {t0:e}: {reason}"),
        });
    }
    Ok(record)
}

/// `sup_t |w_a - w_b|_{k-1} + |s_a - s_b|_{l-1}` over shared snapshot times.
pub fn cauchy_difference(
    a: &TrajectoryRecord,
    b: &TrajectoryRecord,
    pair: AdmissiblePair,
) -> Result<f64> {
    let mut sup = 0.0f64;
    let mut shared = 0;
    for sa in &a.snapshots {
        if let Some(sb) = b.snapshot_at(sa.t) {
            let dw = sobolev_norm(&sa.w.sub(&sb.w)?, pair.k.saturating_sub(1));
            let ds = x_norm(&sa.s.sub(&sb.s)?, pair.l.saturating_sub(1));
            sup = sup.max(dw + ds);
            shared += 1;
        }
    }
    if shared == 0 {
        return Err(Error::Parameter(
            "trajectories share no sample times".into(),
        ));
    }
    Ok(sup)
}

/// Sample diagnostics of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub t0: f64,
    pub steps: usize,
    pub samples: Vec<SampleDiagnostics>,
    pub flags: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_cal: f64,
    pub retries: u32,
    pub window_start: f64,
    /// True when `window_start` came from the configuration.
    pub overridden: bool,
}

#[derive(Clone, Debug)]
pub struct WaveOpRun {
    pub datum: AsymptoticDatum,
    pub params: ModelParams,
    pub pair: AdmissiblePair,
    pub schedule: Vec<f64>,
    pub window: (f64, f64),
    pub times: Vec<f64>,
    pub seeds: Vec<SeedRun>,
    /// `cauchy[i]` compares seeds `i` and `i + 1`.
    pub cauchy: Vec<f64>,
    pub divergent: bool,
    pub calibration: Calibration,
    /// Working limit: the largest seed, or the extrapolation when requested.
    pub limit: TrajectoryRecord,
    pub extrapolated: bool,
    pub warnings: Vec<String>,
}

impl WaveOpRun {
    pub fn limit_snapshots(&self) -> &[AuxState] {
        &self.limit.snapshots
    }
}

struct Attempt {
    seeds: Vec<SeedRun>,
    cauchy: Vec<f64>,
    last: TrajectoryRecord,
    previous: Option<TrajectoryRecord>,
}

fn run_schedule(
    datum: &AsymptoticDatum,
    schedule: &[f64],
    times: &[f64],
    config: &WaveOpConfig,
    params: &ModelParams,
) -> Result<Attempt> {
    let pair = config.integrator.pair;
    let workers = rayon::current_num_threads().max(1);
    let mut seeds = Vec::new();
    let mut cauchy = Vec::new();
    let mut previous: Option<TrajectoryRecord> = None;
    let mut last: Option<TrajectoryRecord> = None;
    for chunk in schedule.chunks(workers) {
        let records: Vec<TrajectoryRecord> = chunk
            .par_iter()
            .map(|&t0| run_seed(datum, t0, times, &config.integrator, params))
            .collect::<Result<_>>()?;
        for (rec, &t0) in records.into_iter().zip(chunk) {
            if let Some(prev) = &last {
                cauchy.push(cauchy_difference(prev, &rec, pair)?);
            }
            seeds.push(SeedRun {
                t0,
                steps: rec.steps,
                samples: rec.samples.clone(),
                flags: rec.flags.clone(),
            });
            previous = last.take();
            last = Some(rec);
        }
    }
    Ok(Attempt {
        seeds,
        cauchy,
        last: last.expect("schedule is not empty"),
        previous,
    })
}

fn extrapolate(
    last: &TrajectoryRecord,
    previous: &TrajectoryRecord,
    t_last: f64,
    t_prev: f64,
    gamma: f64,
    pair: AdmissiblePair,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    let p = gamma.min(0.5);
    let c = 1.0 / ((t_last / t_prev).powf(p) - 1.0);
    let mut out = last.clone();
    out.samples.clear();
    out.snapshots.clear();
    out.flags.clear();
    for snap in &last.snapshots {
        let Some(prev) = previous.snapshot_at(snap.t) else {
            continue;
        };
        let w = snap.w.add(&snap.w.sub(&prev.w)?.scaled(c.into()))?;
        let s = snap.s.add(&snap.s.sub(&prev.s)?.scaled(c))?;
        let phi = match (&snap.phi, &prev.phi) {
            (Some(a), Some(b)) => Some(a.add(&a.sub(b)?.scaled(c))?),
            _ => None,
        };
        let state = AuxState::new(snap.t, w, s, phi)?;
        let diag = diagnose(&state, pair);
        out.push_sample(diag, config, state);
    }
    out.finish();
    Ok(out)
}

/// Builds the wave operator for `datum` as the limit over the seed schedule.
pub fn wave_operator(
    datum: &AsymptoticDatum,
    config: &WaveOpConfig,
    params: &ModelParams,
) -> Result<WaveOpRun> {
    config.validate()?;
    check_long_range(params)?;
    let pair = config.integrator.pair;
    let admissible = crate::model::check_admissible(params.dim, params.mu, pair.k, pair.l)?;
    if !admissible.is_admissible() {
        return Err(Error::Parameter(format!(
            "pair ({}, {}) is not admissible",
            pair.k, pair.l
        )));
    }
    let mut warnings = Vec::new();
    let mut c_cal = config.calibration;
    let mut retries = 0;
    loop {
        let window_start = match config.window_start {
            Some(t) => t,
            None => {
                let t = heuristic_t(datum, params, pair, c_cal)?.max(1.0);
                if !t.is_finite() {
                    return Err(Error::Parameter(
                        "heuristic window start is infinite; set window_start".into(),
                    ));
                }
                t
            }
        };
        if window_start >= config.window_end {
            return Err(Error::Parameter(format!(
                "window start {window_start:.4e} is not below the window end {:.4e}",
                config.window_end
            )));
        }
        let times = geometric_times(window_start, config.window_end, config.sample_ratio);
        let attempt = run_schedule(datum, &config.schedule, &times, config, params)?;
        let c = &attempt.cauchy;
        let stalled = c.len() >= 2 && c[1] >= c[0];
        if stalled && config.window_start.is_none() && retries < config.max_retries {
            warnings.push(format!(
                "first Cauchy differences did not decrease with T = {window_start:.4e}; doubling T"
            ));
            c_cal *= 2.0;
            retries += 1;
            continue;
        }
        if config.schedule[0] < window_start {
            warnings.push(format!(
                "smallest seed {:.4e} lies below the window start {window_start:.4e}",
                config.schedule[0]
            ));
        }
        let divergent = c.windows(2).any(|p| p[1] >= p[0]);
        if divergent {
            warnings.push("Cauchy differences are not strictly decreasing".into());
        }
        let n = config.schedule.len();
        let (limit, extrapolated) = match (&attempt.previous, config.richardson && n >= 2) {
            (Some(prev), true) => (
                extrapolate(
                    &attempt.last,
                    prev,
                    config.schedule[n - 1],
                    config.schedule[n - 2],
                    params.gamma,
                    pair,
                    &config.integrator,
                )?,
                true,
            ),
            _ => (attempt.last, false),
        };
        return Ok(WaveOpRun {
            datum: datum.clone(),
            params: *params,
            pair,
            schedule: config.schedule.clone(),
            window: (window_start, config.window_end),
            times,
            seeds: attempt.seeds,
            cauchy: attempt.cauchy,
            divergent,
            calibration: Calibration {
                c_cal,
                retries,
                window_start,
                overridden: config.window_start.is_some(),
            },
            limit,
            extrapolated,
            warnings,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    /// `|w+' - w+|_{k-1} / |w+|_{k-1}`
    pub w_plus_error: f64,
    /// `|s02'(1) - s02(1)|_{l-1} / |s02(1)|_{l-1}`, absolute when `s02(1) = 0`.
    pub s02_error: f64,
    pub w_plus_proxy: f64,
    pub s0_tail: f64,
    pub cauchy: Vec<f64>,
    pub window: (f64, f64),
}

/// Builds the wave operator and recovers its datum from the limit trajectory.
pub fn round_trip_check(
    datum: &AsymptoticDatum,
    params: &ModelParams,
    config: &WaveOpConfig,
) -> Result<RoundTripReport> {
    let run = wave_operator(datum, config, params)?;
    let pair = run.pair;
    let est = extract_w_plus(&run.limit, None)?;
    let (s02_1, series) = extract_s02_at_1(&run.limit, &est.w_plus, params, &config.quadrature)?;
    let km1 = pair.k.saturating_sub(1);
    let lm1 = pair.l.saturating_sub(1);
    let w_ref = sobolev_norm(&datum.w_plus, km1);
    let w_err = sobolev_norm(&est.w_plus.sub(&datum.w_plus)?, km1);
    let s_true = datum.s02_at_1();
    let s_ref = x_norm(&s_true, lm1);
    let s_err = x_norm(&s02_1.sub(&s_true)?, lm1);
    Ok(RoundTripReport {
        w_plus_error: if w_ref > 0.0 { w_err / w_ref } else { w_err },
        s02_error: if s_ref > 0.0 { s_err / s_ref } else { s_err },
        w_plus_proxy: est.proxy,
        s0_tail: series.tail_norm,
        cauchy: run.cauchy,
        window: run.window,
    })
}

/// `w+' = w+ exp(i sigma)`, `phi02'(1) = phi02(1) + sigma`.
pub fn gauge_transform(datum: &AsymptoticDatum, sigma: &RealField) -> Result<AsymptoticDatum> {
    AsymptoticDatum::new(datum.w_plus.rotate(sigma)?, datum.phi02_at_1.add(sigma)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub times: Vec<f64>,
    /// `|v(t) - v'(t)|_2`
    pub v_discrepancy: Vec<f64>,
    /// `|w(t)|_2`
    pub mass: Vec<f64>,
    /// `sup |(phi' - phi)(t) - sigma|`
    pub phase_drift: Vec<f64>,
}

impl GaugeReport {
    pub fn max_relative(&self) -> f64 {
        self.v_discrepancy
            .iter()
            .zip(&self.mass)
            .map(|(d, m)| if *m > 0.0 { d / m } else { *d })
            .fold(0.0, f64::max)
    }
}

/// Compares the v-representations of the wave operators of a datum and of its gauge transform.
pub fn gauge_covariance_check(
    datum: &AsymptoticDatum,
    sigma: &RealField,
    params: &ModelParams,
    config: &WaveOpConfig,
) -> Result<GaugeReport> {
    let other = gauge_transform(datum, sigma)?;
    let run_a = wave_operator(datum, config, params)?;
    let cfg_b = WaveOpConfig {
        window_start: Some(run_a.window.0),
        ..config.clone()
    };
    let run_b = wave_operator(&other, &cfg_b, params)?;
    let mut report = GaugeReport {
        times: Vec::new(),
        v_discrepancy: Vec::new(),
        mass: Vec::new(),
        phase_drift: Vec::new(),
    };
    for a in &run_a.limit.snapshots {
        let Some(b) = run_b.limit.snapshot_at(a.t) else {
            continue;
        };
        let va = phi_map(a)?;
        let vb = phi_map(b)?;
        let (pa, pb) = (a.phi.as_ref(), b.phi.as_ref());
        let drift = match (pa, pb) {
            (Some(pa), Some(pb)) => pb.sub(pa)?.sub(sigma)?.max_abs(),
            _ => return Err(Error::Parameter("gauge check needs phases".into())),
        };
        report.times.push(a.t);
        report.v_discrepancy.push(l2_norm(&va.sub(&vb)?));
        report.mass.push(l2_norm(&a.w));
        report.phase_drift.push(drift);
    }
    Ok(report)
}

/// `v = exp(-i phi) U*(1/t) w`; the physical solution is `M(t) D(t) v`.
pub fn phi_map(state: &AuxState) -> Result<ComplexField> {
    v_representation(state)
}

#[derive(Clone, Debug)]
pub struct OmegaRun {
    pub run: WaveOpRun,
    /// `(t, v(t))` on the limit trajectory.
    pub v: Vec<(f64, ComplexField)>,
}

/// The modified wave operator in the v-representation, built from `F u+`
/// with `phi02(1) = 0`.
pub fn omega_map(
    u_plus_fourier: &ComplexField,
    params: &ModelParams,
    config: &WaveOpConfig,
) -> Result<OmegaRun> {
    let datum = AsymptoticDatum::from_w_plus(u_plus_fourier.clone());
    let run = wave_operator(&datum, config, params)?;
    let v = run
        .limit
        .snapshots
        .iter()
        .map(|s| Ok((s.t, phi_map(s)?)))
        .collect::<Result<_>>()?;
    Ok(OmegaRun { run, v })
}

#[derive(Clone, Debug)]
pub struct OmegaOne {
    pub v_at_1: ComplexField,
    pub mass_at_1: f64,
    pub start: f64,
    pub omega: OmegaRun,
}

/// Continues `Omega(u+)` from the window start down to `t = 1` with the
/// split-step solver; needs `mu < 2`.
pub fn omega1_map(
    u_plus_fourier: &ComplexField,
    params: &ModelParams,
    config: &WaveOpConfig,
    rel_step: f64,
) -> Result<OmegaOne> {
    if !(params.mu < 2.0) {
        return Err(Error::Unsupported(format!(
            "continuation to t = 1 needs mu < 2, got {}",
            params.mu
        )));
    }
    let omega = omega_map(u_plus_fourier, params, config)?;
    let (start, v_start) = omega
        .v
        .first()
        .cloned()
        .ok_or_else(|| Error::Parameter("wave operator kept no samples".into()))?;
    let k = config.integrator.pair.k;
    let bound = config.integrator.blowup_factor * sobolev_norm(&v_start, k).max(1.0);
    // march in decades so growth is caught before it overflows
    let mut t = start;
    let mut v = v_start;
    while t > 1.0 {
        let next = (t / 10.0).max(1.0);
        v = evolve_rescaled(&v, t, next, rel_step, params)?;
        t = next;
        let size = sobolev_norm(&v, k);
        if !size.is_finite() || size > bound {
            return Err(Error::Integration {
                t,
                reason: format!("v-representation reached |v|_{k} = {size:.3e}"),
            });
        }
    }
    Ok(OmegaOne {
        mass_at_1: l2_norm(&v),
        v_at_1: v,
        start,
        omega,
    })
}

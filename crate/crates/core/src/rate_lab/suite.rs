//! The acceptance experiments on the default arena: `n = 3`, `mu = 1`,
//! `(k, l) = (2, 2)`, a centered Gaussian `w+` on `32^3` points over `[-16, 16)^3`.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::series::{decay_series, fill_error_columns, DecaySeries};
use super::{fit_power_law, fit_with_min, RateFit, Verdict, VerdictKind, VerdictTable};
use crate::dynamics::{rescaled_nls_step, write_samples_csv, IntegratorConfig, SampleDiagnostics};
use crate::model::{AdmissiblePair, ModelParams};
use crate::profiles::{AsymptoticDatum, QuadratureConfig};
use crate::scattering::{
    gauge_covariance_check, phi_map, round_trip_check, wave_operator, write_differences_csv,
    GaugeReport, WaveOpConfig,
};
use crate::spectral::io::{write_field, StoredField};
use crate::spectral::norms::{delta_exponent, l2_norm, sobolev_norm};
use crate::spectral::ops::{dealias, dealias_real};
use crate::spectral::{
    free_propagator, ComplexField, GaussianOp, GaussianSymbol, GridSpec, RealField,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaConfig {
    pub points: usize,
    pub half_width: f64,
    pub mu: f64,
    pub pair: AdmissiblePair,
    /// Target `|w+|_{k+1}`.
    pub a_target: f64,
    /// Standard deviation of `|w+| ~ exp(-|x|^2 / (2 sigma^2))`.
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Seed time of the single-seed runs used for rate fits.
    pub seed_t0: f64,
    /// Sampled interval `[T, T_max]`.
    pub window: (f64, f64),
    /// Fit interval: the window without its first half-decade and last quarter-decade.
    pub fit_window: (f64, f64),
    pub sample_ratio: f64,
    pub integrator: IntegratorConfig,
    pub quadrature: QuadratureConfig,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            points: 32,
            half_width: 16.0,
            mu: 1.0,
            pair: AdmissiblePair { k: 2, l: 2 },
            a_target: 0.5,
            sigma: 1.5,
            lambdas: vec![1.0, -1.0],
            gammas: vec![0.6, 0.75, 0.9],
            seed_t0: 1e9,
            window: (100.0 / 10f64.sqrt(), 1e4 * 10f64.powf(0.25)),
            fit_window: (1e2, 1e4),
            sample_ratio: 2f64.powf(0.25),
            integrator: IntegratorConfig::default(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CauchyConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub schedule: Vec<f64>,
    pub window_end: f64,
}

impl Default for CauchyConfig {
    fn default() -> Self {
        CauchyConfig {
            gamma: 0.8,
            lambda: 1.0,
            schedule: vec![100.0, 200.0, 400.0, 800.0],
            window_end: 1e4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundTripConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// `phi02(1) = amplitude exp(-|x|^2 / (2 width^2))`.
    pub phase_amplitude: f64,
    pub phase_width: f64,
    /// Seed time for the `lambda = 0` case.
    pub free_t0: f64,
}

impl Default for RoundTripConfig {
    fn default() -> Self {
        RoundTripConfig {
            gamma: 0.8,
            lambda: 1.0,
            phase_amplitude: 0.05,
            phase_width: 2.0,
            free_t0: 1e13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// `sigma = amplitude exp(-|x|^2 / (2 width^2))`.
    pub sigma_amplitude: f64,
    pub sigma_width: f64,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        GaugeConfig {
            gamma: 0.8,
            lambda: 1.0,
            sigma_amplitude: 0.3,
            sigma_width: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceConfig {
    /// Criteria to run, from 1 to 8.
    pub criteria: Vec<u32>,
    pub arena: ArenaConfig,
    pub cauchy: CauchyConfig,
    pub round_trip: RoundTripConfig,
    pub gauge: GaugeConfig,
    /// Damping used for the robustness comparison.
    pub robust_eta: f64,
    /// Compare against the arena doubled in `L` at equal spacing.
    pub robust_double: bool,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            criteria: (1..=8).collect(),
            arena: ArenaConfig::default(),
            cauchy: CauchyConfig::default(),
            round_trip: RoundTripConfig::default(),
            gauge: GaugeConfig::default(),
            robust_eta: 1e-5,
            robust_double: true,
        }
    }
}

impl AcceptanceConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.criteria.iter().find(|c| !(1..=8).contains(*c)) {
            return Err(Error::Parameter(format!("unknown criterion {c}")));
        }
        let a = &self.arena;
        if a.window.0 >= a.window.1 || a.fit_window.0 >= a.fit_window.1 {
            return Err(Error::Parameter("windows must be increasing".into()));
        }
        if a.fit_window.0 < a.window.0 || a.fit_window.1 > a.window.1 {
            return Err(Error::Parameter(
                "fit window must lie inside the sampled window".into(),
            ));
        }
        if a.seed_t0 < a.window.1 {
            return Err(Error::Parameter(
                "seed time must not be below the window end".into(),
            ));
        }
        if !(a.a_target > 0.0 && a.sigma > 0.0) {
            return Err(Error::Parameter(
                "datum amplitude and width must be positive".into(),
            ));
        }
        a.integrator.validate()?;
        a.quadrature.validate()
    }

    /// SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    fn wants(&self, c: u32) -> bool {
        self.criteria.contains(&c)
    }
}

/// The arena grid, or its doubling in `L` with the same spacing.
pub fn arena_grid(arena: &ArenaConfig, doubled: bool) -> Result<GridSpec> {
    let f = if doubled { 2 } else { 1 };
    GridSpec::new(3, arena.points * f, arena.half_width * f as f64)
}

fn gaussian_real(grid: GridSpec, amplitude: f64, width: f64) -> RealField {
    dealias_real(&RealField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        amplitude * (-r2 / (2.0 * width * width)).exp()
    }))
}

/// Centered Gaussian `w+` scaled to `|w+|_{k+1} = a_target`, with `phi02(1)`
/// either zero or a Gaussian bump.
pub fn arena_datum(
    arena: &ArenaConfig,
    grid: GridSpec,
    phase: Option<(f64, f64)>,
) -> Result<AsymptoticDatum> {
    let s2 = 2.0 * arena.sigma * arena.sigma;
    let raw = dealias(&ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new((-r2 / s2).exp(), 0.0)
    }));
    let scale = arena.a_target / sobolev_norm(&raw, arena.pair.k + 1);
    let w = raw.scaled(Complex64::new(scale, 0.0));
    let phi = match phase {
        Some((amp, width)) => gaussian_real(grid, amp, width),
        None => RealField::zeros(grid),
    };
    AsymptoticDatum::new(w, phi)
}

fn params(arena: &ArenaConfig, lambda: f64, gamma: f64) -> Result<ModelParams> {
    ModelParams::new(3, lambda, gamma, arena.mu)
}

fn integrator(arena: &ArenaConfig, eta: f64) -> IntegratorConfig {
    IntegratorConfig {
        eta,
        pair: arena.pair,
        ..arena.integrator.clone()
    }
}

fn seeded_config(arena: &ArenaConfig, t0: f64, eta: f64) -> WaveOpConfig {
    WaveOpConfig {
        schedule: vec![t0],
        window_start: Some(arena.window.0),
        window_end: arena.window.1,
        sample_ratio: arena.sample_ratio,
        integrator: integrator(arena, eta),
        quadrature: arena.quadrature,
        ..WaveOpConfig::default()
    }
}

/// SHA-256 of a field in the binary field format.
pub fn field_checksum(field: StoredField) -> Result<String> {
    let mut bytes = Vec::new();
    write_field(&mut bytes, &field)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn tag(lambda: f64, gamma: f64) -> String {
    format!("lambda{lambda:+}.gamma{gamma:.2}")
}

/// One single-seed construction on the arena and its error series.
#[derive(Clone, Debug)]
pub struct DecayRun {
    pub lambda: f64,
    pub gamma: f64,
    pub eta: f64,
    pub grid: GridSpec,
    pub series: DecaySeries,
    /// Limit samples with the error columns filled in.
    pub samples: Vec<SampleDiagnostics>,
    /// Largest relative mass change per unit log-time from the seed.
    pub mass_drift: f64,
    /// Largest relative `|v|_2` change over one split step.
    pub split_step_drift: f64,
    /// `max vort / (1 + |ds|_inf)` over the samples.
    pub vorticity: f64,
    /// `max |s - grad phi|_inf / (1 + |s|_inf)` over the samples.
    pub gradient_gap: f64,
    pub flags: Vec<String>,
    pub checksums: BTreeMap<String, String>,
}

impl DecayRun {
    pub fn tag(&self) -> String {
        tag(self.lambda, self.gamma)
    }
}

fn split_step_drift(v: &ComplexField, t: f64, params: &ModelParams) -> Result<f64> {
    let mut v = v.clone();
    let mut t = t;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dt = 0.02 * t;
        let next = rescaled_nls_step(&v, t, dt, params)?;
        let (a, b) = (l2_norm(&v), l2_norm(&next));
        worst = worst.max((b - a).abs() / a);
        v = next;
        t += dt;
    }
    Ok(worst)
}

/// Seeds at `seed_t0`, samples the window and measures every error series.
pub fn decay_run(
    arena: &ArenaConfig,
    lambda: f64,
    gamma: f64,
    eta: f64,
    doubled: bool,
) -> Result<DecayRun> {
    let grid = arena_grid(arena, doubled)?;
    let datum = arena_datum(arena, grid, None)?;
    let p = params(arena, lambda, gamma)?;
    let run = wave_operator(&datum, &seeded_config(arena, arena.seed_t0, eta), &p)?;
    let series = decay_series(&run, &arena.quadrature, &[2.0, 6.0])?;
    let mut record = run.limit.clone();
    fill_error_columns(&mut record, &series);
    let first = &run.limit.snapshots[0];
    let split = split_step_drift(&phi_map(first)?, first.t, &p)?;
    let mut checksums = BTreeMap::new();
    let t = tag(lambda, gamma);
    checksums.insert(
        format!("{t}.w_plus"),
        field_checksum(StoredField::Complex(datum.w_plus.clone()))?,
    );
    if let Some(last) = run.limit.snapshots.last() {
        checksums.insert(
            format!("{t}.limit_end_w"),
            field_checksum(StoredField::Complex(last.w.clone()))?,
        );
    }
    let samples = record.samples;
    Ok(DecayRun {
        lambda,
        gamma,
        eta,
        grid,
        mass_drift: run.limit.mass_drift_per_log_time(arena.seed_t0),
        split_step_drift: split,
        vorticity: samples
            .iter()
            .map(|s| s.vort_max / (1.0 + s.jacobian_sup))
            .fold(0.0, f64::max),
        gradient_gap: samples
            .iter()
            .filter_map(|s| s.grad_gap.map(|g| g / (1.0 + s.s_sup)))
            .fold(0.0, f64::max),
        flags: run.limit.flags.clone(),
        samples,
        series,
        checksums,
    })
}

/// All `(lambda, gamma)` combinations of the arena, in that nesting order.
pub fn decay_runs(arena: &ArenaConfig, eta: f64, doubled: bool) -> Vec<Result<DecayRun>> {
    combos(arena)
        .par_iter()
        .map(|&(l, g)| decay_run(arena, l, g, eta, doubled))
        .collect()
}

fn combos(arena: &ArenaConfig) -> Vec<(f64, f64)> {
    arena
        .lambdas
        .iter()
        .flat_map(|&l| arena.gammas.iter().map(move |&g| (l, g)))
        .collect()
}

fn exponent_or_fail(
    id: String,
    theory: f64,
    tol: f64,
    times: &[f64],
    values: Option<&[f64]>,
    window: (f64, f64),
) -> Verdict {
    let Some(values) = values else {
        return Verdict::failed(id, "series unavailable");
    };
    match fit_power_law(times, values, window) {
        Ok(fit) => Verdict::exponent(id, theory, fit, tol),
        Err(e) => Verdict::failed(id, e.to_string()),
    }
}

/// Rates of `|w - w+|_k`, `|s - s02|_l` and `|s - s0|_l`.
pub fn decay_verdicts(runs: &[DecayRun], fit_window: (f64, f64)) -> Vec<Verdict> {
    let mut out = Vec::new();
    for r in runs {
        let g = r.gamma;
        let s = &r.series;
        let t = r.tag();
        out.push(exponent_or_fail(
            format!("c3.w_plus.{t}"),
            -g,
            0.2,
            &s.times,
            Some(&s.w_plus_k),
            fit_window,
        ));
        out.push(exponent_or_fail(
            format!("c3.s02.{t}"),
            0.5 - g,
            0.2,
            &s.times,
            Some(&s.s02_l),
            fit_window,
        ));
        out.push(exponent_or_fail(
            format!("c3.s0.{t}"),
            1.0 - 2.0 * g,
            0.2,
            &s.times,
            s.s0_l.as_deref(),
            fit_window,
        ));
    }
    out
}

/// Rates of the two profile errors, their ordering, and the `L^6` variant.
pub fn profile_verdicts(runs: &[DecayRun], fit_window: (f64, f64)) -> Vec<Verdict> {
    let mut out = Vec::new();
    for r in runs {
        let g = r.gamma;
        let s = &r.series;
        let p = &s.profile;
        let t = r.tag();
        out.push(exponent_or_fail(
            format!("c4.phi02.{t}"),
            0.5 - g,
            0.25,
            &p.times,
            Some(&p.phi02),
            fit_window,
        ));
        out.push(exponent_or_fail(
            format!("c4.phi0.{t}"),
            1.0 - 2.0 * g,
            0.25,
            &p.times,
            p.phi0.as_deref(),
            fit_window,
        ));
        let id = format!("c4.order.{t}");
        let last = p
            .times
            .iter()
            .rposition(|&x| x <= fit_window.1 * (1.0 + 1e-12));
        out.push(match (last, &p.phi0) {
            (Some(i), Some(p0)) => Verdict::bound(id, p0[i] / p.phi02[i], 1.0)
                .with_note(format!("phi0 / phi02 at t = {:.4e}", p.times[i])),
            _ => Verdict::failed(id, "series unavailable"),
        });
        let series = |r: f64| {
            s.lr.iter()
                .find(|(q, _)| *q == r)
                .map(|(_, v)| v.as_slice())
        };
        let delta = delta_exponent(3, 6.0);
        let fit = |r: f64| -> std::result::Result<RateFit, String> {
            let v = series(r).ok_or("series unavailable")?;
            fit_power_law(&s.times, v, fit_window).map_err(|e| e.to_string())
        };
        let id = format!("c4.lr6_shift.{t}");
        out.push(match (fit(2.0), fit(6.0)) {
            (Ok(a), Ok(b)) => Verdict::exponent_value(
                id,
                -delta,
                b.exponent - a.exponent,
                a.r_squared.min(b.r_squared),
                0.25,
            ),
            (Err(e), _) | (_, Err(e)) => Verdict::failed(id, e),
        });
        let id = format!("c4.lr6.{t}");
        out.push(match fit(6.0) {
            Ok(b) => Verdict::exponent(id, -delta + 0.5 - g, b, 0.25),
            Err(e) => Verdict::failed(id, e),
        });
    }
    out
}

/// Mass, split-step, vorticity and gradient-consistency checks over `runs`.
pub fn conservation_verdicts(runs: &[DecayRun]) -> Vec<Verdict> {
    if runs.is_empty() {
        return vec![Verdict::failed("c2.trajectories", "no trajectories")];
    }
    let max = |f: &dyn Fn(&DecayRun) -> f64| runs.iter().map(f).fold(0.0, f64::max);
    let note = format!("{} trajectories", runs.len());
    vec![
        Verdict::bound("c2.mass_drift", max(&|r| r.mass_drift), 1e-8).with_note(note.clone()),
        Verdict::bound("c2.split_step_drift", max(&|r| r.split_step_drift), 1e-13)
            .with_note(note.clone()),
        Verdict::bound("c2.vorticity", max(&|r| r.vorticity), 1e-6).with_note(note.clone()),
        Verdict::bound("c2.gradient_gap", max(&|r| r.gradient_gap), 1e-6).with_note(note),
    ]
}

#[derive(Debug)]
pub struct CauchyOutcome {
    pub schedule: Vec<f64>,
    pub cauchy: Vec<f64>,
    pub window: (f64, f64),
    pub warnings: Vec<String>,
    pub fit: Result<RateFit>,
}

/// The wave operator over the Cauchy schedule with a calibrated window.
pub fn cauchy_experiment(cfg: &AcceptanceConfig, eta: f64) -> Result<CauchyOutcome> {
    let arena = &cfg.arena;
    let c = &cfg.cauchy;
    let grid = arena_grid(arena, false)?;
    let datum = arena_datum(arena, grid, None)?;
    let p = params(arena, c.lambda, c.gamma)?;
    let wc = WaveOpConfig {
        schedule: c.schedule.clone(),
        window_start: None,
        window_end: c.window_end,
        sample_ratio: arena.sample_ratio,
        integrator: integrator(arena, eta),
        quadrature: arena.quadrature,
        ..WaveOpConfig::default()
    };
    let run = wave_operator(&datum, &wc, &p)?;
    let n = run.cauchy.len();
    let fit = if n == 0 {
        Err(Error::Parameter("schedule has a single seed".into()))
    } else {
        fit_with_min(
            &c.schedule[..n],
            &run.cauchy,
            (c.schedule[0], c.schedule[n - 1]),
            3,
        )
    };
    Ok(CauchyOutcome {
        schedule: c.schedule.clone(),
        cauchy: run.cauchy,
        window: run.window,
        warnings: run.warnings,
        fit,
    })
}

pub fn cauchy_verdicts(cfg: &AcceptanceConfig, outcome: &CauchyOutcome) -> Vec<Verdict> {
    let rises = outcome.cauchy.windows(2).filter(|p| p[1] >= p[0]).count();
    let mut out = vec![Verdict::bound("c5.decreasing", rises as f64, 0.0)
        .with_note(format!("{} differences", outcome.cauchy.len()))];
    let theory = -cfg.cauchy.gamma.min(0.5);
    out.push(match &outcome.fit {
        Ok(fit) => Verdict::upper_exponent("c5.t0_exponent", theory, *fit, 0.2),
        Err(e) => Verdict::failed("c5.t0_exponent.upper", e.to_string()),
    });
    out
}

/// Round trips for the interacting case and for `lambda = 0`.
pub fn round_trip_verdicts(cfg: &AcceptanceConfig) -> Vec<Verdict> {
    let arena = &cfg.arena;
    let rt = &cfg.round_trip;
    let interacting = (|| {
        let grid = arena_grid(arena, false)?;
        let datum = arena_datum(arena, grid, Some((rt.phase_amplitude, rt.phase_width)))?;
        let p = params(arena, rt.lambda, rt.gamma)?;
        round_trip_check(&datum, &p, &seeded_config(arena, arena.seed_t0, 0.0))
    })();
    let free = (|| {
        let grid = arena_grid(arena, false)?;
        let datum = arena_datum(arena, grid, None)?;
        let p = params(arena, 0.0, rt.gamma)?;
        round_trip_check(&datum, &p, &seeded_config(arena, rt.free_t0, 0.0))
    })();
    let mut out = Vec::new();
    match interacting {
        Ok(r) => {
            out.push(Verdict::bound("c6.w_plus", r.w_plus_error, 1e-2));
            out.push(Verdict::bound("c6.s02_at_1", r.s02_error, 2e-2));
        }
        Err(e) => {
            out.push(Verdict::failed("c6.w_plus", e.to_string()));
            out.push(Verdict::failed("c6.s02_at_1", e.to_string()));
        }
    }
    match free {
        Ok(r) => {
            out.push(Verdict::bound("c6.free_w_plus", r.w_plus_error, 1e-10));
            out.push(Verdict::bound("c6.free_s02_at_1", r.s02_error, 1e-10).with_note("absolute"));
        }
        Err(e) => {
            out.push(Verdict::failed("c6.free_w_plus", e.to_string()));
            out.push(Verdict::failed("c6.free_s02_at_1", e.to_string()));
        }
    }
    out
}

#[derive(Debug)]
pub struct GaugeOutcome {
    pub report: GaugeReport,
    pub fit: Result<RateFit>,
}

pub fn gauge_experiment(cfg: &AcceptanceConfig, eta: f64) -> Result<GaugeOutcome> {
    let arena = &cfg.arena;
    let g = &cfg.gauge;
    let grid = arena_grid(arena, false)?;
    let datum = arena_datum(arena, grid, None)?;
    let sigma = gaussian_real(grid, g.sigma_amplitude, g.sigma_width);
    let p = params(arena, g.lambda, g.gamma)?;
    let report = gauge_covariance_check(
        &datum,
        &sigma,
        &p,
        &seeded_config(arena, arena.seed_t0, eta),
    )?;
    let fit = fit_power_law(&report.times, &report.phase_drift, arena.fit_window);
    Ok(GaugeOutcome { report, fit })
}

pub fn gauge_verdicts(cfg: &AcceptanceConfig, outcome: &GaugeOutcome) -> Vec<Verdict> {
    vec![
        Verdict::bound("c7.v_discrepancy", outcome.report.max_relative(), 1e-3),
        match &outcome.fit {
            Ok(fit) => Verdict::exponent("c7.phase_drift", -cfg.gauge.gamma, *fit, 0.25),
            Err(e) => Verdict::failed("c7.phase_drift", e.to_string()),
        },
    ]
}

fn max_rel(a: &ComplexField, b: &ComplexField) -> f64 {
    let scale = a.values().iter().fold(0.0f64, |m, z| m.max(z.norm()));
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
        / scale
}

/// Closed-form and grid checks of the basic operator identities.
pub fn identity_verdicts(arena: &ArenaConfig) -> Vec<Verdict> {
    let times = [1.0, 2.0, 10.0];
    let mut algebra = 0.0f64;
    let symbols = [
        (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
        (Complex64::new(0.7, -0.2), Complex64::new(0.4, 0.9)),
    ];
    let mut failure = None;
    for (amp, width) in symbols {
        for t in times {
            let r = (|| {
                let g = GaussianSymbol::new(amp, width, 3)?;
                let lhs = g.compose(&[
                    GaussianOp::Chirp(t),
                    GaussianOp::Dilation(t),
                    GaussianOp::Fourier,
                    GaussianOp::Chirp(t),
                ])?;
                Ok::<_, Error>(lhs.distance(&g.apply(GaussianOp::Free(t))?))
            })();
            match r {
                Ok(d) => algebra = algebra.max(d),
                Err(e) => failure = Some(e.to_string()),
            }
        }
    }
    let mut out = vec![match failure {
        None => Verdict::bound("c1.gaussian_free_factorization", algebra, 1e-12),
        Some(e) => Verdict::failed("c1.gaussian_free_factorization", e),
    }];

    let grid_check = (|| {
        let grid = arena_grid(arena, false)?;
        let g = GaussianSymbol::new(Complex64::new(1.0, 0.0), Complex64::new(4.0, 0.0), 3)?;
        let f = g.apply(GaussianOp::Fourier)?.sample(&grid);
        let mut worst = 0.0f64;
        let mut mass = 0.0f64;
        for t in times {
            let exact = g
                .compose(&[GaussianOp::Fourier, GaussianOp::Chirp(t)])?
                .sample(&grid);
            let lhs = free_propagator(&f, -1.0 / t);
            worst = worst.max(max_rel(&exact, &lhs));
            mass = mass.max((l2_norm(&lhs) - l2_norm(&f)).abs() / l2_norm(&f));
        }
        Ok::<_, Error>((worst, mass))
    })();
    match grid_check {
        Ok((worst, mass)) => {
            out.push(Verdict::bound("c1.chirp_conjugation", worst, 1e-6));
            out.push(Verdict::bound("c1.free_flow_mass", mass, 1e-12));
        }
        Err(e) => {
            out.push(Verdict::failed("c1.chirp_conjugation", e.to_string()));
            out.push(Verdict::failed("c1.free_flow_mass", e.to_string()));
        }
    }
    out
}

/// `|fitted_alt - fitted_base| <= 0.05` for every exponent claim present in both.
pub fn robustness_verdicts(label: &str, base: &[Verdict], alt: &[Verdict]) -> Vec<Verdict> {
    base.iter()
        .filter(|v| v.kind != VerdictKind::Bound)
        .map(|v| {
            let id = format!("c8.{label}.{}", v.claim_id);
            match alt.iter().find(|a| a.claim_id == v.claim_id) {
                Some(a) if v.fitted.is_finite() && a.fitted.is_finite() => {
                    Verdict::bound(id, (a.fitted - v.fitted).abs(), 0.05)
                }
                _ => Verdict::failed(id, "exponent missing in one of the runs"),
            }
        })
        .collect()
}

fn split_runs(
    cfg: &ArenaConfig,
    runs: Vec<Result<DecayRun>>,
    prefix: &str,
) -> (Vec<DecayRun>, Vec<Verdict>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for ((l, g), r) in combos(cfg).into_iter().zip(runs) {
        match r {
            Ok(run) => ok.push(run),
            Err(e) => failed.push(Verdict::failed(
                format!("{prefix}.run.{}", tag(l, g)),
                e.to_string(),
            )),
        }
    }
    (ok, failed)
}

fn maybe<T: Send>(on: bool, f: impl FnOnce() -> T + Send) -> Option<T> {
    on.then(f)
}

/// Runs the selected criteria, writes `verdicts.csv`, `verdicts.json` and the
/// per-run trajectory CSVs to `out_dir` when given, and returns the table.
/// A failing experiment becomes a failing verdict; the suite continues.
pub fn run_acceptance_suite(
    cfg: &AcceptanceConfig,
    out_dir: Option<&Path>,
) -> Result<VerdictTable> {
    cfg.validate()?;
    let arena = &cfg.arena;
    let robust = cfg.wants(8);
    let need_decay = [2, 3, 4].iter().any(|&c| cfg.wants(c)) || robust;
    let need_c5 = cfg.wants(5) || robust;
    let need_c7 = cfg.wants(7) || robust;
    let eta = cfg.robust_eta;

    let ((decay, (eta_decay, doubled)), ((c5, c5_eta), (c7, c7_eta))) = rayon::join(
        || {
            (
                maybe(need_decay, || decay_runs(arena, 0.0, false)),
                rayon::join(
                    || maybe(robust, || decay_runs(arena, eta, false)),
                    || maybe(robust && cfg.robust_double, || decay_runs(arena, 0.0, true)),
                ),
            )
        },
        || {
            rayon::join(
                || {
                    rayon::join(
                        || maybe(need_c5, || cauchy_experiment(cfg, 0.0)),
                        || maybe(robust, || cauchy_experiment(cfg, eta)),
                    )
                },
                || {
                    rayon::join(
                        || maybe(need_c7, || gauge_experiment(cfg, 0.0)),
                        || maybe(robust, || gauge_experiment(cfg, eta)),
                    )
                },
            )
        },
    );

    let mut verdicts = Vec::new();
    if cfg.wants(1) {
        verdicts.extend(identity_verdicts(arena));
    }
    let (decay, decay_failed) = split_runs(arena, decay.unwrap_or_default(), "base");
    verdicts.extend(decay_failed);
    let fit_window = arena.fit_window;
    let base_rates: Vec<Verdict> = decay_verdicts(&decay, fit_window)
        .into_iter()
        .chain(profile_verdicts(&decay, fit_window))
        .collect();
    if cfg.wants(3) {
        verdicts.extend(
            base_rates
                .iter()
                .filter(|v| v.claim_id.starts_with("c3."))
                .cloned(),
        );
    }
    if cfg.wants(4) {
        verdicts.extend(
            base_rates
                .iter()
                .filter(|v| v.claim_id.starts_with("c4."))
                .cloned(),
        );
    }
    let c5_verdicts = c5.as_ref().map(|r| match r {
        Ok(o) => cauchy_verdicts(cfg, o),
        Err(e) => vec![Verdict::failed("c5.run", e.to_string())],
    });
    if cfg.wants(5) {
        verdicts.extend(c5_verdicts.clone().unwrap_or_default());
    }
    if cfg.wants(6) {
        verdicts.extend(round_trip_verdicts(cfg));
    }
    let c7_verdicts = c7.as_ref().map(|r| match r {
        Ok(o) => gauge_verdicts(cfg, o),
        Err(e) => vec![Verdict::failed("c7.run", e.to_string())],
    });
    if cfg.wants(7) {
        verdicts.extend(c7_verdicts.clone().unwrap_or_default());
    }

    let mut all_runs: Vec<&DecayRun> = decay.iter().collect();
    let (eta_runs, eta_failed) = split_runs(arena, eta_decay.unwrap_or_default(), "eta");
    let (dbl_runs, dbl_failed) = split_runs(arena, doubled.unwrap_or_default(), "doubled");
    if robust {
        verdicts.extend(eta_failed);
        verdicts.extend(dbl_failed);
        let base_all: Vec<Verdict> = base_rates
            .iter()
            .cloned()
            .chain(c5_verdicts.unwrap_or_default())
            .chain(c7_verdicts.unwrap_or_default())
            .collect();
        let eta_all: Vec<Verdict> = decay_verdicts(&eta_runs, fit_window)
            .into_iter()
            .chain(profile_verdicts(&eta_runs, fit_window))
            .chain(match c5_eta {
                Some(Ok(o)) => cauchy_verdicts(cfg, &o),
                _ => Vec::new(),
            })
            .chain(match c7_eta {
                Some(Ok(o)) => gauge_verdicts(cfg, &o),
                _ => Vec::new(),
            })
            .collect();
        verdicts.extend(robustness_verdicts("eta", &base_all, &eta_all));
        if cfg.robust_double {
            let dbl_all: Vec<Verdict> = decay_verdicts(&dbl_runs, fit_window)
                .into_iter()
                .chain(profile_verdicts(&dbl_runs, fit_window))
                .collect();
            verdicts.extend(robustness_verdicts("doubled", &base_rates, &dbl_all));
        }
        all_runs.extend(eta_runs.iter());
        all_runs.extend(dbl_runs.iter());
    }
    if cfg.wants(2) {
        let owned: Vec<DecayRun> = all_runs.iter().map(|r| (*r).clone()).collect();
        verdicts.extend(conservation_verdicts(&owned));
    }
    let table = VerdictTable::new(verdicts);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut checksums = BTreeMap::new();
        for (label, runs) in [("base", &decay), ("eta", &eta_runs), ("doubled", &dbl_runs)] {
            for r in runs.iter() {
                let name = format!("decay_{label}_{}.csv", r.tag());
                write_samples_csv(File::create(dir.join(&name))?, &r.samples)?;
                for (k, v) in &r.checksums {
                    checksums.insert(format!("{label}.{k}"), v.clone());
                }
            }
        }
        if let Some(Ok(o)) = &c5 {
            write_differences_csv(
                File::create(dir.join("differences.csv"))?,
                &o.schedule,
                &o.cauchy,
            )?;
        }
        table.write_csv(File::create(dir.join("verdicts.csv"))?)?;
        let report = table.report(cfg.hash(), checksums);
        std::fs::write(
            dir.join("verdicts.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
    }
    Ok(table)
}

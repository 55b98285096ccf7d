//! Time integration of the auxiliary amplitude/velocity/phase system and
//! the rescaled direct solver.

mod nls;
mod rhs;
mod trajectory;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{AdmissiblePair, ModelParams};
use crate::spectral::norms::{l2_norm, velocity_norm_parts};
use crate::spectral::ops::{real_fields_from_spectra, real_spectra, real_spectrum, spectrum};
use crate::spectral::{
    fft, gradient, sobolev_norm, ComplexField, GridSpec, RealField, VectorField,
};
use crate::{Error, Result};

pub use nls::{
    cross_check_gauge, evolve_rescaled, rescaled_nls_step, v_representation, GaugeCrossCheck,
};
pub(crate) use rhs::SpectralState;
pub use trajectory::{
    read_samples_csv, write_samples_csv, SampleDiagnostics, TrajectoryRecord, PROFILE_COLUMNS,
    TRAJECTORY_COLUMNS,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One time slice of the auxiliary system.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxState {
    pub t: f64,
    pub w: ComplexField,
    pub s: VectorField,
    pub phi: Option<RealField>,
}

impl AuxState {
    pub fn new(t: f64, w: ComplexField, s: VectorField, phi: Option<RealField>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("time must be positive, got {t}")));
        }
        w.grid().same_as(s.grid())?;
        if let Some(p) = &phi {
            w.grid().same_as(p.grid())?;
        }
        Ok(AuxState { t, w, s, phi })
    }

    pub fn grid(&self) -> &GridSpec {
        self.w.grid()
    }

    pub(crate) fn to_spectral(&self) -> SpectralState {
        let comps: Vec<&RealField> = self.s.components().iter().collect();
        SpectralState {
            w: spectrum(&self.w),
            s: real_spectra(&comps),
            phi: self.phi.as_ref().map(real_spectrum),
        }
    }

    pub(crate) fn from_spectral(grid: &GridSpec, t: f64, st: &SpectralState) -> Self {
        let mut w = st.w.clone();
        fft::inverse(grid, &mut w);
        let s = VectorField::new(*grid, real_fields_from_spectra(grid, st.s.clone()))
            .expect("one spectrum per axis");
        let phi = st.phi.as_ref().map(|p| {
            let mut buf = p.clone();
            fft::inverse(grid, &mut buf);
            RealField::new(*grid, buf.iter().map(|z| z.re).collect())
                .unwrap_or_else(|_| RealField::zeros(*grid))
        });
        AuxState {
            t,
            w: ComplexField::new(*grid, w).unwrap_or_else(|_| ComplexField::zeros(*grid)),
            s,
            phi,
        }
    }
}

/// Derivatives `(dw, ds, dphi)` of the auxiliary system at `state`.
pub fn aux_rhs(
    state: &AuxState,
    params: &ModelParams,
) -> Result<(ComplexField, VectorField, Option<RealField>)> {
    check_model_grid(state.grid(), params)?;
    let grid = *state.grid();
    let out = rhs::rhs(&grid, params, state.t, &state.to_spectral());
    let d = AuxState::from_spectral(&grid, state.t, &out.deriv);
    Ok((d.w, d.s, d.phi))
}

fn check_model_grid(grid: &GridSpec, params: &ModelParams) -> Result<()> {
    if grid.dim != params.dim {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} but model dimension {}",
            grid.dim, params.dim
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Largest step in log-time `ln t`.
    pub dt_base: f64,
    /// Multiplies both step limits, in `(0, 1]`.
    pub cfl_safety: f64,
    /// Parabolic regularization strength.
    pub eta: f64,
    /// Increasing output times.
    pub sample_times: Vec<f64>,
    pub tol_grad: f64,
    pub tol_vort: f64,
    /// Halt when a monitored norm exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    pub keep_snapshots: bool,
    pub pair: AdmissiblePair,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt_base: 0.1,
            cfl_safety: 1.0,
            eta: 0.0,
            sample_times: Vec::new(),
            tol_grad: 1e-6,
            tol_vort: 1e-6,
            blowup_factor: 1e6,
            keep_snapshots: false,
            pair: AdmissiblePair { k: 2, l: 2 },
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_base > 0.0 && self.dt_base.is_finite()) {
            return Err(Error::Parameter(format!(
                "dt_base = {} must be positive",
                self.dt_base
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Parameter(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta = {} must be >= 0", self.eta)));
        }
        if self
            .sample_times
            .iter()
            .any(|&t| !(t > 0.0 && t.is_finite()))
        {
            return Err(Error::Parameter("sample times must be positive".into()));
        }
        if self.sample_times.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Parameter("sample times must be increasing".into()));
        }
        if !(self.tol_grad > 0.0 && self.tol_vort > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Parameter("blow-up factor must exceed 1".into()));
        }
        Ok(())
    }
}

/// Geometric sample times `t_min * ratio^j` up to `t_max`, both ends included.
pub fn geometric_times(t_min: f64, t_max: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![t_min];
    let mut t = t_min;
    loop {
        t *= ratio;
        if t >= t_max * (1.0 - 1e-12) {
            break;
        }
        out.push(t);
    }
    if t_max > t_min {
        out.push(t_max);
    }
    out
}

/// All first derivatives `d_i s_j`, flattened as `i * n + j`.
fn jacobian(s: &VectorField) -> Vec<RealField> {
    let grid = *s.grid();
    let n = grid.dim;
    let tables = grid.tables();
    let comps: Vec<&RealField> = s.components().iter().collect();
    let spectra = real_spectra(&comps);
    let derivs = (0..n * n)
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            spectra[j]
                .iter()
                .zip(&tables.xi_odd[i])
                .map(|(z, &k)| I * k * z)
                .collect()
        })
        .collect();
    real_fields_from_spectra(&grid, derivs)
}

fn vorticity_and_jacobian_sup(s: &VectorField) -> (f64, f64) {
    let n = s.grid().dim;
    let jac = jacobian(s);
    let mut vort = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for (a, b) in jac[i * n + j].values().iter().zip(jac[j * n + i].values()) {
                vort = vort.max((a - b).abs());
            }
        }
    }
    let sup = jac.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    (vort, sup)
}

/// `max |d_i s_j - d_j s_i|` over nodes and index pairs.
pub fn vorticity_max(s: &VectorField) -> f64 {
    vorticity_and_jacobian_sup(s).0
}

/// `max |d_i s_j|` over nodes and index pairs.
pub fn jacobian_sup(s: &VectorField) -> f64 {
    vorticity_and_jacobian_sup(s).1
}

/// `max |s - grad phi|`, pointwise Euclidean length.
pub fn gradient_gap(s: &VectorField, phi: &RealField) -> Result<f64> {
    s.grid().same_as(phi.grid())?;
    Ok(s.sub(&gradient(phi))?.max_length())
}

pub fn diagnose(state: &AuxState, pair: AdmissiblePair) -> SampleDiagnostics {
    let (vort, jac_sup) = vorticity_and_jacobian_sup(&state.s);
    let grad_gap = state
        .phi
        .as_ref()
        .map(|p| gradient_gap(&state.s, p).expect("state fields share the grid"));
    SampleDiagnostics {
        t: state.t,
        mass: l2_norm(&state.w),
        norm_w_k: sobolev_norm(&state.w, pair.k),
        norm_w_km1: sobolev_norm(&state.w, pair.k.saturating_sub(1)),
        norm_s_l: velocity_norm_parts(&state.s, pair.l).total(),
        norm_s_lm1: velocity_norm_parts(&state.s, pair.l.saturating_sub(1)).total(),
        vort_max: vort,
        grad_gap,
        s_sup: state.s.max_length(),
        jacobian_sup: jac_sup,
        ..SampleDiagnostics::default()
    }
}

/// Slotwise `exp(-eta |xi|^2 |1/ta - 1/tb|)`.
fn smoothing_factor(grid: &GridSpec, eta: f64, ta: f64, tb: f64) -> Vec<f64> {
    let span = (1.0 / ta - 1.0 / tb).abs();
    grid.tables()
        .xi_sq
        .iter()
        .map(|&k2| (-eta * k2 * span).exp())
        .collect()
}

struct Stepper<'a> {
    grid: GridSpec,
    params: &'a ModelParams,
    eta: f64,
}

impl Stepper<'_> {
    /// Log-time derivative `t d/dt`.
    fn log_rhs(&self, t: f64, st: &SpectralState) -> rhs::RhsOutput {
        let mut out = rhs::rhs(&self.grid, self.params, t, st);
        out.deriv.scale(t);
        out
    }

    /// One Lawson RK4 step from `ta` to `tb` with the first stage given.
    fn step(&self, ta: f64, tb: f64, x: &SpectralState, k1: &SpectralState) -> SpectralState {
        let dtau = (tb / ta).ln();
        let tm = (ta * tb).sqrt();
        let factors = (self.eta > 0.0).then(|| {
            (
                smoothing_factor(&self.grid, self.eta, ta, tm),
                smoothing_factor(&self.grid, self.eta, tm, tb),
            )
        });
        let apply = |st: &mut SpectralState, which: usize| {
            if let Some((e1, e2)) = &factors {
                match which {
                    1 => st.scale_slots(e1),
                    2 => st.scale_slots(e2),
                    _ => {
                        st.scale_slots(e1);
                        st.scale_slots(e2);
                    }
                }
            }
        };

        let mut x2 = x.clone();
        x2.axpy(0.5 * dtau, k1);
        apply(&mut x2, 1);
        let k2 = self.log_rhs(tm, &x2).deriv;

        let mut ex = x.clone();
        apply(&mut ex, 1);
        let mut x3 = ex.clone();
        x3.axpy(0.5 * dtau, &k2);
        let k3 = self.log_rhs(tm, &x3).deriv;

        apply(&mut ex, 2);
        let mut e2k3 = k3.clone();
        apply(&mut e2k3, 2);
        let mut x4 = ex.clone();
        x4.axpy(dtau, &e2k3);
        let k4 = self.log_rhs(tb, &x4).deriv;

        let mut acc = k1.clone();
        apply(&mut acc, 3);
        let mut mid = k2;
        mid.axpy(1.0, &k3);
        apply(&mut mid, 2);
        acc.axpy(2.0, &mid);
        acc.axpy(1.0, &k4);
        let mut out = ex;
        out.axpy(dtau / 6.0, &acc);
        out
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Integrates from `initial.t` to `t_target` in either direction.
///
/// Steps are explicit RK4 in `tau = ln t` with
/// `dtau = cfl * min(dt_base, t h / (1 + max|s|))`, landing exactly on every
/// sample time. A blow-up or non-finite state ends the run early with the
/// failure recorded in the returned trajectory.
pub fn integrate_aux(
    initial: &AuxState,
    t_target: f64,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    params.check_solver()?;
    check_model_grid(initial.grid(), params)?;
    if !(t_target > 0.0 && t_target.is_finite()) {
        return Err(Error::Parameter(format!(
            "target time must be positive, got {t_target}"
        )));
    }
    let grid = *initial.grid();
    let h = grid.spacing();
    let t0 = initial.t;
    let forward = t_target >= t0;
    let mut stops: Vec<f64> = config
        .sample_times
        .iter()
        .copied()
        .filter(|&s| {
            if forward {
                s > t0 && s < t_target && !same_time(s, t0) && !same_time(s, t_target)
            } else {
                s < t0 && s > t_target && !same_time(s, t0) && !same_time(s, t_target)
            }
        })
        .collect();
    if !forward {
        stops.reverse();
    }
    stops.push(t_target);
    let is_sample = |t: f64| config.sample_times.iter().any(|&s| same_time(s, t));

    let mut record = TrajectoryRecord::new(grid, *params, config.pair);
    let stepper = Stepper {
        grid,
        params,
        eta: config.eta,
    };
    let mut state = initial.to_spectral();
    let mut t = t0;
    let weight = grid.cell_volume() / grid.len() as f64;
    let norms0 = state
        .spectral_energies()
        .map(|e| (weight * e).sqrt().max(1.0));
    let initial_diag = diagnose(initial, config.pair);
    record.initial_mass = initial_diag.mass;
    if is_sample(t0) {
        record.push_sample(initial_diag.clone(), config, initial.clone());
    }

    let guard = |st: &SpectralState| -> Option<String> {
        if !st.is_finite() {
            return Some("non-finite state".into());
        }
        let e = st.spectral_energies();
        for (name, (val, base)) in ["w", "s", "phi"].iter().zip(e.iter().zip(norms0)) {
            let norm = (weight * val).sqrt();
            if norm > config.blowup_factor * base {
                return Some(format!(
                    "L2 norm of {name} reached {norm:.3e}, over {:.0e} times its initial size",
                    config.blowup_factor
                ));
            }
        }
        None
    };

    for &stop in &stops {
        while !same_time(t, stop) {
            let k1 = stepper.log_rhs(t, &state);
            let limit = config.cfl_safety * config.dt_base.min(t * h / (1.0 + k1.s_sup));
            let remaining = (stop / t).ln().abs();
            let (t_next, landed) = if remaining <= limit * (1.0 + 1e-9) {
                (stop, true)
            } else if forward {
                (t * limit.exp(), false)
            } else {
                (t * (-limit).exp(), false)
            };
            state = stepper.step(t, t_next, &state, &k1.deriv);
            t = if landed { stop } else { t_next };
            record.steps += 1;
            if let Some(reason) = guard(&state) {
                record.failure = Some(format!("halted at t = {t:.6e}: {reason}"));
                record.final_state = Some(AuxState::from_spectral(&grid, t, &state));
                record.finish();
                return Ok(record);
            }
        }
        if is_sample(stop) {
            let snap = AuxState::from_spectral(&grid, stop, &state);
            let diag = diagnose(&snap, config.pair);
            let blown = diag.norm_w_k > config.blowup_factor * initial_diag.norm_w_k.max(1.0)
                || diag.norm_s_l > config.blowup_factor * initial_diag.norm_s_l.max(1.0);
            record.push_sample(diag, config, snap);
            if blown {
                record.failure = Some(format!(
                    "halted at t = {stop:.6e}: Sobolev norms exceeded the blow-up guard"
                ));
                break;
            }
        }
    }
    if record.final_state.is_none() {
        record.final_state = Some(AuxState::from_spectral(&grid, t, &state));
    }
    record.finish();
    Ok(record)
}

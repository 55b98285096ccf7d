use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AuxState, IntegratorConfig};
use crate::model::{AdmissiblePair, ModelParams};
use crate::spectral::GridSpec;
use crate::{Error, Result};

/// Fixed CSV column order for trajectory diagnostics.
pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "t",
    "mass",
    "norm_w_k",
    "norm_w_km1",
    "norm_s_l",
    "norm_s_lm1",
    "vort_max",
    "grad_gap",
    "err_w_plus_k",
    "err_s0_l",
    "err_s02_l",
    "err_prof_phi02",
    "err_prof_phi0",
];

/// The error columns filled in by later analysis.
pub const PROFILE_COLUMNS: [&str; 5] = [
    "err_w_plus_k",
    "err_s0_l",
    "err_s02_l",
    "err_prof_phi02",
    "err_prof_phi0",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub norm_w_k: f64,
    pub norm_w_km1: f64,
    pub norm_s_l: f64,
    pub norm_s_lm1: f64,
    pub vort_max: f64,
    pub grad_gap: Option<f64>,
    /// `|w(t) - w+|_k`
    pub err_w_plus_k: Option<f64>,
    /// `|s(t) - s0(t)|_l`
    pub err_s0_l: Option<f64>,
    /// `|s(t) - s02(t)|_l`
    pub err_s02_l: Option<f64>,
    /// Profile error against the phase `phi02`.
    pub err_prof_phi02: Option<f64>,
    /// Profile error against the phase `phi0`.
    pub err_prof_phi0: Option<f64>,
    #[serde(skip)]
    pub s_sup: f64,
    #[serde(skip)]
    pub jacobian_sup: f64,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl SampleDiagnostics {
    fn row(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:e}");
        vec![
            f(self.t),
            f(self.mass),
            f(self.norm_w_k),
            f(self.norm_w_km1),
            f(self.norm_s_l),
            f(self.norm_s_lm1),
            f(self.vort_max),
            cell(self.grad_gap),
            cell(self.err_w_plus_k),
            cell(self.err_s0_l),
            cell(self.err_s02_l),
            cell(self.err_prof_phi02),
            cell(self.err_prof_phi0),
        ]
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self> {
        let opt = |i: usize| -> Result<Option<f64>> {
            let s = row.get(i).unwrap_or("").trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::Format(format!("column {}: {e}", TRAJECTORY_COLUMNS[i])))
            }
        };
        let req = |i: usize| -> Result<f64> {
            opt(i)?
                .ok_or_else(|| Error::Format(format!("column {} is empty", TRAJECTORY_COLUMNS[i])))
        };
        Ok(SampleDiagnostics {
            t: req(0)?,
            mass: req(1)?,
            norm_w_k: req(2)?,
            norm_w_km1: req(3)?,
            norm_s_l: req(4)?,
            norm_s_lm1: req(5)?,
            vort_max: req(6)?,
            grad_gap: opt(7)?,
            err_w_plus_k: opt(8)?,
            err_s0_l: opt(9)?,
            err_s02_l: opt(10)?,
            err_prof_phi02: opt(11)?,
            err_prof_phi0: opt(12)?,
            ..SampleDiagnostics::default()
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub pair: AdmissiblePair,
    /// Ascending in `t`.
    pub samples: Vec<SampleDiagnostics>,
    /// Field snapshots matching `samples` when requested.
    pub snapshots: Vec<AuxState>,
    pub final_state: Option<AuxState>,
    pub failure: Option<String>,
    pub flags: Vec<String>,
    pub steps: usize,
    pub initial_mass: f64,
}

impl TrajectoryRecord {
    pub(crate) fn new(grid: GridSpec, params: ModelParams, pair: AdmissiblePair) -> Self {
        TrajectoryRecord {
            grid,
            params,
            pair,
            samples: Vec::new(),
            snapshots: Vec::new(),
            final_state: None,
            failure: None,
            flags: Vec::new(),
            steps: 0,
            initial_mass: 0.0,
        }
    }

    pub(crate) fn push_sample(
        &mut self,
        diag: SampleDiagnostics,
        config: &IntegratorConfig,
        snap: AuxState,
    ) {
        if diag.vort_max > 10.0 * config.tol_vort * (1.0 + diag.jacobian_sup) {
            self.flags.push(format!(
                "vorticity {:.3e} at t = {:.6e} exceeds ten times its tolerance",
                diag.vort_max, diag.t
            ));
        }
        if let Some(gap) = diag.grad_gap {
            if gap > 10.0 * config.tol_grad * (1.0 + diag.s_sup) {
                self.flags.push(format!(
                    "s - grad phi gap {gap:.3e} at t = {:.6e} exceeds ten times its tolerance",
                    diag.t
                ));
            }
        }
        self.samples.push(diag);
        if config.keep_snapshots {
            self.snapshots.push(snap);
        }
    }

    pub(crate) fn finish(&mut self) {
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.sort_by(|&a, &b| self.samples[a].t.total_cmp(&self.samples[b].t));
        let samples = order.iter().map(|&i| self.samples[i].clone()).collect();
        if self.snapshots.len() == self.samples.len() {
            self.snapshots = order.iter().map(|&i| self.snapshots[i].clone()).collect();
        }
        self.samples = samples;
        let ratio = self.growth_ratio_max();
        if ratio > 1.0 {
            self.flags.push(format!(
                "sampled growth of |w|_k reached {ratio:.2} times the monitored bound"
            ));
        }
    }

    /// Joins two runs from the same initial state, one backward and one forward.
    pub(crate) fn merge(mut self, other: TrajectoryRecord) -> Self {
        let keep_snaps = self.snapshots.len() == self.samples.len()
            && other.snapshots.len() == other.samples.len();
        self.samples.extend(other.samples);
        if keep_snaps {
            self.snapshots.extend(other.snapshots);
        } else {
            self.snapshots.clear();
        }
        self.steps += other.steps;
        self.failure = self.failure.or(other.failure);
        self.flags.extend(other.flags);
        let later = |s: &Option<AuxState>| s.as_ref().map(|x| x.t).unwrap_or(f64::NEG_INFINITY);
        if later(&other.final_state) > later(&self.final_state) {
            self.final_state = other.final_state;
        }
        self.flags.retain(|f| !f.starts_with("sampled growth"));
        self.finish();
        self
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&AuxState> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t.abs())
    }

    /// Largest `|m(t) - m(t0)| / m(t0)` per unit of `|ln(t / t0)|`, with
    /// intervals shorter than one unit counted as one.
    pub fn mass_drift_per_log_time(&self, t0: f64) -> f64 {
        if self.initial_mass == 0.0 {
            return self.samples.iter().map(|s| s.mass).fold(0.0, f64::max);
        }
        self.samples
            .iter()
            .map(|s| {
                let drift = (s.mass - self.initial_mass).abs() / self.initial_mass;
                drift / (s.t / t0).ln().abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest ratio of the sampled `|d|w|_k / dt|` to `10 t^-2 |s|_l |w|_k`.
    pub fn growth_ratio_max(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|p| {
                let (a, b) = (&p[0], &p[1]);
                let rate = (b.norm_w_k - a.norm_w_k).abs() / (b.t - a.t).abs();
                let bound = 10.0
                    * (a.norm_s_l * a.norm_w_k / (a.t * a.t))
                        .max(b.norm_s_l * b.norm_w_k / (b.t * b.t));
                if bound > 0.0 {
                    rate / bound
                } else if rate > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_samples_csv(out, &self.samples)
    }
}

pub fn write_samples_csv<W: Write>(out: W, samples: &[SampleDiagnostics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_COLUMNS)?;
    for s in samples {
        w.write_record(s.row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(inp: R) -> Result<Vec<SampleDiagnostics>> {
    let mut r = csv::Reader::from_reader(inp);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_COLUMNS {
        return Err(Error::Format(format!(
            "trajectory columns {:?} do not match the expected schema",
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.records()
        .map(|rec| SampleDiagnostics::from_row(&rec?))
        .collect()
}

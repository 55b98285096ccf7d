//! The run configuration file.
//!
//! A single TOML document. Every table and key is optional and falls back to
//! the defaults below; unknown keys are rejected.
//!
//! ```toml
//! schedule = [100.0, 200.0, 400.0, 800.0]
//! output = "out"
//!
//! [model]       # dim, lambda, gamma, mu
//! [pair]        # k, l
//! [grid]        # points, half_width (the box is [-L, L)^n)
//! [integrator]  # dt_base, cfl_safety, eta, tol_grad, tol_vort, blowup_factor
//! [quadrature]  # tol, max_doublings
//! [datum]       # amplitude, width, center, phase = { kind = "zero" | "gaussian", ... }
//! [windows]     # start, end, sample_ratio
//! [wave_operator]  # calibration, max_retries, richardson, error_columns
//! [extract]     # trajectory, tolerance
//! [cross_check] # rel_step, tolerance
//! [suite]       # acceptance suite: criteria, arena, cauchy, round_trip, gauge, ...
//! ```

use std::path::{Path, PathBuf};

use dollard::dynamics::IntegratorConfig;
use dollard::model::{AdmissiblePair, ModelParams};
use dollard::profiles::{AsymptoticDatum, QuadratureConfig};
use dollard::rate_lab::AcceptanceConfig;
use dollard::scattering::WaveOpConfig;
use dollard::spectral::ops::{dealias, dealias_real};
use dollard::spectral::{ComplexField, GridSpec, RealField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest fraction of the datum's mass allowed outside `|x| <= L/2`.
pub const MASS_LEAK_LIMIT: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub dim: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            dim: 3,
            lambda: 1.0,
            gamma: 0.8,
            mu: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    pub half_width: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            points: 32,
            half_width: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt_base: f64,
    pub cfl_safety: f64,
    pub eta: f64,
    pub tol_grad: f64,
    pub tol_vort: f64,
    pub blowup_factor: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        IntegratorSection {
            dt_base: d.dt_base,
            cfl_safety: d.cfl_safety,
            eta: d.eta,
            tol_grad: d.tol_grad,
            tol_vort: d.tol_vort,
            blowup_factor: d.blowup_factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseSpec {
    Zero,
    Gaussian { amplitude: f64, width: f64 },
}

/// `w+ = amplitude exp(-|x - center|^2 / (2 width^2))`, and `phi02(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatumSection {
    pub amplitude: f64,
    pub width: f64,
    /// Empty means the origin.
    pub center: Vec<f64>,
    pub phase: PhaseSpec,
}

impl Default for DatumSection {
    fn default() -> Self {
        DatumSection {
            amplitude: 0.1,
            width: 1.5,
            center: Vec::new(),
            phase: PhaseSpec::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Comparison window start; for the wave operator, calibrated when absent.
    pub start: Option<f64>,
    pub end: f64,
    pub sample_ratio: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        let d = WaveOpConfig::default();
        WindowSection {
            start: None,
            end: d.window_end,
            sample_ratio: d.sample_ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveOpSection {
    pub calibration: f64,
    pub max_retries: u32,
    pub richardson: bool,
    /// Fill the error columns of `limit.csv`.
    pub error_columns: bool,
}

impl Default for WaveOpSection {
    fn default() -> Self {
        let d = WaveOpConfig::default();
        WaveOpSection {
            calibration: d.calibration,
            max_retries: d.max_retries,
            richardson: d.richardson,
            error_columns: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    /// Output directory of a `simulate-aux` run, relative to the config file.
    pub trajectory: Option<PathBuf>,
    /// Flag the `w+` estimate when its error proxy exceeds this.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossCheckSection {
    /// Split-step size as a fraction of `t`.
    pub rel_step: f64,
    /// Gate on the largest relative discrepancy.
    pub tolerance: f64,
}

impl Default for CrossCheckSection {
    fn default() -> Self {
        CrossCheckSection {
            rel_step: 0.01,
            tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: Vec<f64>,
    /// Output directory when none is given on the command line.
    pub output: Option<PathBuf>,
    pub model: ModelSection,
    pub pair: AdmissiblePair,
    pub grid: GridSection,
    pub integrator: IntegratorSection,
    pub quadrature: QuadratureConfig,
    pub datum: DatumSection,
    pub windows: WindowSection,
    pub wave_operator: WaveOpSection,
    pub extract: ExtractSection,
    pub cross_check: CrossCheckSection,
    pub suite: AcceptanceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schedule: WaveOpConfig::default().schedule,
            output: None,
            model: ModelSection::default(),
            pair: AdmissiblePair { k: 2, l: 2 },
            grid: GridSection::default(),
            integrator: IntegratorSection::default(),
            quadrature: QuadratureConfig::default(),
            datum: DatumSection::default(),
            windows: WindowSection::default(),
            wave_operator: WaveOpSection::default(),
            extract: ExtractSection::default(),
            cross_check: CrossCheckSection::default(),
            suite: AcceptanceConfig::default(),
        }
    }
}

/// A parsed and checked configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub raw: RunConfig,
    pub params: ModelParams,
    pub pair: AdmissiblePair,
    pub grid: GridSpec,
    /// Directory holding the config file; relative paths resolve against it.
    pub base_dir: PathBuf,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| usage(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Checks every invariant of the file and builds the core types.
    pub fn resolve(self, base_dir: &Path) -> Result<Resolved, CliError> {
        let m = &self.model;
        let params = ModelParams::new(m.dim, m.lambda, m.gamma, m.mu)
            .map_err(|e| usage(format!("[model] {e}")))?;
        let pair = AdmissiblePair::new(m.dim, m.mu, self.pair.k, self.pair.l)
            .map_err(|e| usage(format!("[pair] refused: {e}")))?;
        let grid = GridSpec::new(m.dim, self.grid.points, self.grid.half_width)
            .map_err(|e| usage(format!("[grid] {e}")))?;
        let d = &self.datum;
        if !(d.amplitude >= 0.0 && d.amplitude.is_finite()) {
            return Err(usage("[datum] amplitude must be finite and >= 0"));
        }
        let h = grid.spacing();
        // 4 width is the 1/e^2 diameter of |w+|
        if !(4.0 * d.width >= 4.0 * h) {
            return Err(usage(format!(
                "[datum] width {} is below the grid spacing {h}; the Gaussian must span at least 4 cells",
                d.width
            )));
        }
        if !(d.center.is_empty() || d.center.len() == m.dim) {
            return Err(usage(format!("[datum] center needs {} coordinates", m.dim)));
        }
        if let PhaseSpec::Gaussian { amplitude, width } = d.phase {
            if !(amplitude.is_finite() && width > 0.0) {
                return Err(usage(
                    "[datum.phase] amplitude must be finite and width positive",
                ));
            }
        }
        let cc = &self.cross_check;
        if !(cc.rel_step > 0.0 && cc.tolerance > 0.0) {
            return Err(usage(
                "[cross_check] rel_step and tolerance must be positive",
            ));
        }
        self.integrator_config(pair)
            .validate()
            .map_err(|e| usage(format!("[integrator] {e}")))?;
        self.quadrature
            .validate()
            .map_err(|e| usage(format!("[quadrature] {e}")))?;
        self.suite
            .validate()
            .map_err(|e| usage(format!("[suite] {e}")))?;
        let resolved = Resolved {
            raw: self,
            params,
            pair,
            grid,
            base_dir: base_dir.to_path_buf(),
        };
        let leak = resolved.mass_outside_half_box();
        if !(leak < MASS_LEAK_LIMIT) {
            return Err(usage(format!(
                "[datum] fraction {leak:.3e} of the mass lies outside |x| <= L/2; limit {MASS_LEAK_LIMIT:e}"
            )));
        }
        Ok(resolved)
    }

    pub fn integrator_config(&self, pair: AdmissiblePair) -> IntegratorConfig {
        let i = &self.integrator;
        IntegratorConfig {
            dt_base: i.dt_base,
            cfl_safety: i.cfl_safety,
            eta: i.eta,
            tol_grad: i.tol_grad,
            tol_vort: i.tol_vort,
            blowup_factor: i.blowup_factor,
            pair,
            ..IntegratorConfig::default()
        }
    }
}

impl Resolved {
    fn center(&self) -> Vec<f64> {
        let c = &self.raw.datum.center;
        if c.is_empty() {
            vec![0.0; self.grid.dim]
        } else {
            c.clone()
        }
    }

    /// The Gaussian sampled on the grid, before the two-thirds truncation.
    fn gaussian(&self) -> ComplexField {
        let d = &self.raw.datum;
        let c = self.center();
        let s2 = 2.0 * d.width * d.width;
        ComplexField::from_fn(self.grid, |x| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            Complex64::new(d.amplitude * (-r2 / s2).exp(), 0.0)
        })
    }

    pub fn w_plus(&self) -> ComplexField {
        dealias(&self.gaussian())
    }

    pub fn phi02_at_1(&self) -> RealField {
        match self.raw.datum.phase {
            PhaseSpec::Zero => RealField::zeros(self.grid),
            PhaseSpec::Gaussian { amplitude, width } => {
                let s2 = 2.0 * width * width;
                dealias_real(&RealField::from_fn(self.grid, |x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    amplitude * (-r2 / s2).exp()
                }))
            }
        }
    }

    pub fn datum(&self) -> Result<AsymptoticDatum, CliError> {
        AsymptoticDatum::new(self.w_plus(), self.phi02_at_1()).map_err(CliError::from)
    }

    /// Fraction of the Gaussian's `sum |.|^2` at nodes with `|x| > L/2`.
    /// Truncation ringing is a resolution matter and is not counted.
    pub fn mass_outside_half_box(&self) -> f64 {
        let w = self.gaussian();
        let r_max = 0.5 * self.grid.half_width;
        let mut total = 0.0;
        let mut outside = 0.0;
        for (x, z) in self.grid.nodes().zip(w.values()) {
            let m = z.norm_sqr();
            total += m;
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > r_max {
                outside += m;
            }
        }
        if total > 0.0 {
            outside / total
        } else {
            0.0
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.raw.integrator_config(self.pair)
    }

    pub fn wave_op_config(&self) -> WaveOpConfig {
        let r = &self.raw;
        WaveOpConfig {
            schedule: r.schedule.clone(),
            window_start: r.windows.start,
            window_end: r.windows.end,
            sample_ratio: r.windows.sample_ratio,
            calibration: r.wave_operator.calibration,
            max_retries: r.wave_operator.max_retries,
            richardson: r.wave_operator.richardson,
            integrator: self.integrator(),
            quadrature: r.quadrature,
        }
    }

    pub fn window_start(&self, command: &str) -> Result<f64, CliError> {
        self.raw
            .windows
            .start
            .ok_or_else(|| usage(format!("[windows] start is required for {command}")))
    }

    pub fn trajectory_dir(&self) -> Result<PathBuf, CliError> {
        let p = self
            .raw
            .extract
            .trajectory
            .as_ref()
            .ok_or_else(|| usage("[extract] trajectory is required for extract-asymptotics"))?;
        Ok(if p.is_absolute() {
            p.clone()
        } else {
            self.base_dir.join(p)
        })
    }
}

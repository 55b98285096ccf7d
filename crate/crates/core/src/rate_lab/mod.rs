//! Power-law fits, verdicts against theoretical exponents, and the
//! acceptance experiments that produce them.

mod series;
mod suite;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use series::{
    decay_series, fill_error_columns, lr_profile_errors, profile_error_series, DecaySeries,
    ProfileSeries,
};
pub use suite::{
    arena_datum, arena_grid, cauchy_experiment, cauchy_verdicts, conservation_verdicts, decay_run,
    decay_runs, decay_verdicts, field_checksum, gauge_experiment, gauge_verdicts,
    identity_verdicts, profile_verdicts, robustness_verdicts, round_trip_verdicts,
    run_acceptance_suite, AcceptanceConfig, ArenaConfig, CauchyConfig, CauchyOutcome, DecayRun,
    GaugeConfig, GaugeOutcome, RoundTripConfig,
};

/// Least-squares line through `(ln t, ln value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub sample_count: usize,
}

fn check_window(window: (f64, f64)) -> Result<()> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::Parameter(format!(
            "fit window ({lo}, {hi}) is degenerate"
        )));
    }
    Ok(())
}

/// Fits `value ~ exp(intercept) t^exponent` over the samples with `t` in `window`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    fit_with_min(times, values, window, 4)
}

pub(crate) fn fit_with_min(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    min_samples: usize,
) -> Result<RateFit> {
    check_window(window)?;
    if times.len() != values.len() {
        return Err(Error::Parameter(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let (lo, hi) = window;
    let slack = 1e-12;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= lo * (1.0 - slack) && t <= hi * (1.0 + slack) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "value {v} at t = {t} is not positive"
                )));
            }
            x.push(t.ln());
            y.push(v.ln());
        }
    }
    let n = x.len();
    if n < min_samples {
        return Err(Error::Parameter(format!(
            "{n} samples in the fit window, need at least {min_samples}"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("all fit samples share one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let res: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| {
                let e = b - (intercept + slope * a);
                e * e
            })
            .sum();
        (1.0 - res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        exponent: slope,
        intercept,
        r_squared,
        window,
        sample_count: n,
    })
}

/// Minimum `r^2` for any exponent verdict to pass.
pub const R2_GATE: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    /// `|fitted - theory| <= tolerance` and `r^2 >= 0.9`.
    Exponent,
    /// `fitted <= theory + tolerance` and `r^2 >= 0.9`.
    UpperExponent,
    /// `fitted <= tolerance`; `theory` is informational.
    Bound,
}

/// Claim ids of one-sided exponent verdicts end with this suffix.
pub const UPPER_SUFFIX: &str = ".upper";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim_id: String,
    pub kind: VerdictKind,
    pub theory: f64,
    /// Non-finite values go to JSON as `null` and come back as NaN.
    #[serde(with = "nullable")]
    pub fitted: f64,
    pub tolerance: f64,
    pub r2: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// The pass rule for each verdict kind.
pub fn decide(
    kind: VerdictKind,
    theory: f64,
    fitted: f64,
    tolerance: f64,
    r2: Option<f64>,
) -> bool {
    let gated = || r2.map(|r| r >= R2_GATE).unwrap_or(false);
    match kind {
        VerdictKind::Exponent => (fitted - theory).abs() <= tolerance && gated(),
        VerdictKind::UpperExponent => fitted <= theory + tolerance && gated(),
        VerdictKind::Bound => fitted <= tolerance,
    }
}

impl Verdict {
    pub fn exponent(
        claim_id: impl Into<String>,
        theory: f64,
        fit: RateFit,
        tolerance: f64,
    ) -> Self {
        Self::from_fit(
            claim_id.into(),
            VerdictKind::Exponent,
            theory,
            fit,
            tolerance,
        )
    }

    /// One-sided: the fitted exponent must not exceed `theory + tolerance`.
    pub fn upper_exponent(
        claim_id: impl Into<String>,
        theory: f64,
        fit: RateFit,
        tolerance: f64,
    ) -> Self {
        let mut id: String = claim_id.into();
        if !id.ends_with(UPPER_SUFFIX) {
            id.push_str(UPPER_SUFFIX);
        }
        Self::from_fit(id, VerdictKind::UpperExponent, theory, fit, tolerance)
    }

    fn from_fit(
        claim_id: String,
        kind: VerdictKind,
        theory: f64,
        fit: RateFit,
        tolerance: f64,
    ) -> Self {
        let r2 = Some(fit.r_squared);
        Verdict {
            pass: decide(kind, theory, fit.exponent, tolerance, r2),
            claim_id,
            kind,
            theory,
            fitted: fit.exponent,
            tolerance,
            r2,
            fit: Some(fit),
            note: String::new(),
        }
    }

    /// An exponent difference with its own `r^2`, e.g. a shift between two fits.
    pub fn exponent_value(
        claim_id: impl Into<String>,
        theory: f64,
        fitted: f64,
        r2: f64,
        tolerance: f64,
    ) -> Self {
        Verdict {
            claim_id: claim_id.into(),
            kind: VerdictKind::Exponent,
            theory,
            fitted,
            tolerance,
            r2: Some(r2),
            pass: decide(VerdictKind::Exponent, theory, fitted, tolerance, Some(r2)),
            fit: None,
            note: String::new(),
        }
    }

    /// `measured <= limit`.
    pub fn bound(claim_id: impl Into<String>, measured: f64, limit: f64) -> Self {
        Verdict {
            claim_id: claim_id.into(),
            kind: VerdictKind::Bound,
            theory: 0.0,
            fitted: measured,
            tolerance: limit,
            r2: None,
            pass: decide(VerdictKind::Bound, 0.0, measured, limit, None),
            fit: None,
            note: String::new(),
        }
    }

    /// A claim whose experiment did not complete.
    pub fn failed(claim_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Verdict {
            note: reason.into(),
            ..Verdict::bound(claim_id, f64::NAN, 0.0)
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Recomputes the pass flag from the stored numbers.
    pub fn reevaluate(&self) -> bool {
        decide(self.kind, self.theory, self.fitted, self.tolerance, self.r2)
    }

    /// One line for logs: `PASS <id> fitted=... theory=... tol=... r2=...`.
    pub fn summary_line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let r2 = self.r2.map(|r| format!(" r2={r:.4}")).unwrap_or_default();
        let head = match self.kind {
            VerdictKind::Bound => format!(
                "{status} {} measured={:.4e} limit={:.4e}",
                self.claim_id, self.fitted, self.tolerance
            ),
            _ => format!(
                "{status} {} fitted={:.4} theory={:.4} tol={}{r2}",
                self.claim_id, self.fitted, self.theory, self.tolerance
            ),
        };
        if self.note.is_empty() {
            head
        } else {
            format!("{head} ({})", self.note)
        }
    }
}

pub const VERDICT_COLUMNS: [&str; 6] = ["claim_id", "theory", "fitted", "tolerance", "r2", "pass"];

/// Verdicts sorted by claim id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictTable {
    pub verdicts: Vec<Verdict>,
}

/// JSON mirror of a verdict table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub config_hash: String,
    pub checksums: BTreeMap<String, String>,
    pub all_pass: bool,
    pub verdicts: Vec<Verdict>,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

impl VerdictTable {
    pub fn new(mut verdicts: Vec<Verdict>) -> Self {
        verdicts.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
        VerdictTable { verdicts }
    }

    pub fn extend(&mut self, more: Vec<Verdict>) {
        self.verdicts.extend(more);
        self.verdicts.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(VERDICT_COLUMNS)?;
        for v in &self.verdicts {
            w.write_record([
                v.claim_id.clone(),
                num(v.theory),
                num(v.fitted),
                num(v.tolerance),
                v.r2.map(num).unwrap_or_default(),
                v.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV form. The kind is recovered from the row: no `r2` means
    /// a bound, an id ending in `.upper` a one-sided exponent.
    pub fn read_csv<R: Read>(inp: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(inp);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != VERDICT_COLUMNS {
            return Err(Error::Format(format!(
                "verdict columns {header:?} do not match"
            )));
        }
        let mut verdicts = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let parse = |i: usize| -> Result<f64> {
                field(i)
                    .parse()
                    .map_err(|e| Error::Format(format!("column {}: {e}", VERDICT_COLUMNS[i])))
            };
            let claim_id = field(0);
            let r2 = if field(4).is_empty() {
                None
            } else {
                Some(parse(4)?)
            };
            let kind = match r2 {
                None => VerdictKind::Bound,
                Some(_) if claim_id.ends_with(UPPER_SUFFIX) => VerdictKind::UpperExponent,
                Some(_) => VerdictKind::Exponent,
            };
            let pass = match field(5).as_str() {
                "true" => true,
                "false" => false,
                other => return Err(Error::Format(format!("column pass: {other:?}"))),
            };
            verdicts.push(Verdict {
                claim_id,
                kind,
                theory: parse(1)?,
                fitted: parse(2)?,
                tolerance: parse(3)?,
                r2,
                pass,
                fit: None,
                note: String::new(),
            });
        }
        Ok(VerdictTable::new(verdicts))
    }

    pub fn report(
        &self,
        config_hash: String,
        checksums: BTreeMap<String, String>,
    ) -> VerdictReport {
        VerdictReport {
            config_hash,
            checksums,
            all_pass: self.all_pass(),
            verdicts: self.verdicts.clone(),
        }
    }
}

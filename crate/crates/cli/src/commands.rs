//! The subcommands. Each writes into `out` and records its stages.
//!
//! Output layout:
//!
//! - `simulate-aux`: `trajectory.csv`, `trajectory.json`, `snapshots/index.csv`
//!   and `snapshots/NNNN_{w,s,phi}.bin`
//! - `wave-operator`: `wave_operator.json`, `seed_NN.csv`, `limit.csv`,
//!   `differences.csv`, `limit_{start,end}_{w,s,phi}.bin`
//! - `extract-asymptotics`: `extract.json`, `velocity.csv`, `w_plus.bin`, `s02_at_1.bin`
//! - `verify-rates`, `check-identities`: `verdicts.csv`, `verdicts.json` and
//!   the per-run trajectory CSVs
//! - `cross-check`: `cross_check.csv`, `verdicts.csv`, `verdicts.json`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use dollard::dynamics::{
    cross_check_gauge, geometric_times, integrate_aux, read_samples_csv, AuxState,
    IntegratorConfig, TrajectoryRecord,
};
use dollard::rate_lab::{
    decay_series, fill_error_columns, run_acceptance_suite, Verdict, VerdictTable,
};
use dollard::scattering::{
    extract_s0, extract_s02_at_1, extract_w_plus, seed_at_t0, wave_operator,
};
use dollard::spectral::io::{read_field, write_field, StoredField};
use dollard::spectral::norms::sobolev_norm;
use dollard::spectral::x_norm;
use serde::Serialize;

use crate::config::Resolved;
use crate::manifest::{sha256_hex, Recorder};
use crate::CliError;

type Outcome = Result<(), CliError>;

fn write_bin(path: &Path, field: StoredField) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field(&mut out, &field)?;
    out.flush()?;
    Ok(())
}

fn read_bin(path: &Path) -> Result<StoredField, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
    read_field(&mut BufReader::new(file))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// The seeded trajectory over the configured window, snapshots kept.
fn simulate(cfg: &Resolved, command: &str) -> Result<TrajectoryRecord, CliError> {
    let start = cfg.window_start(command)?;
    let w = &cfg.raw.windows;
    if !(start > 0.0 && w.end > start && w.sample_ratio > 1.0) {
        return Err(CliError::Usage(format!(
            "[windows] need 0 < start < end and sample_ratio > 1, got start {start}, end {}, ratio {}",
            w.end, w.sample_ratio
        )));
    }
    let datum = cfg.datum()?;
    let seed = seed_at_t0(&datum, start.max(1.0), &cfg.params)?;
    let times = geometric_times(seed.t, w.end, w.sample_ratio);
    let icfg = IntegratorConfig {
        sample_times: times,
        keep_snapshots: true,
        ..cfg.integrator()
    };
    let record = integrate_aux(&seed, w.end, &icfg, &cfg.params)?;
    if let Some(reason) = &record.failure {
        return Err(CliError::Numerical(reason.clone()));
    }
    Ok(record)
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    grid: &'a dollard::spectral::GridSpec,
    params: &'a dollard::model::ModelParams,
    pair: dollard::model::AdmissiblePair,
    steps: usize,
    initial_mass: f64,
    flags: &'a [String],
}

pub fn simulate_aux(cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Outcome {
    let record = rec.stage("integrate", || simulate(cfg, "simulate-aux"))?;
    rec.stage("write", || {
        record.write_csv(File::create(out.join("trajectory.csv"))?)?;
        write_json(
            &out.join("trajectory.json"),
            &TrajectorySummary {
                grid: &record.grid,
                params: &record.params,
                pair: record.pair,
                steps: record.steps,
                initial_mass: record.initial_mass,
                flags: &record.flags,
            },
        )?;
        let snap_dir = out.join("snapshots");
        std::fs::create_dir_all(&snap_dir)?;
        let mut index = String::from("index,t\n");
        for (i, s) in record.snapshots.iter().enumerate() {
            index.push_str(&format!("{i},{:e}\n", s.t));
            write_bin(
                &snap_dir.join(format!("{i:04}_w.bin")),
                StoredField::Complex(s.w.clone()),
            )?;
            write_bin(
                &snap_dir.join(format!("{i:04}_s.bin")),
                StoredField::Vector(s.s.clone()),
            )?;
            if let Some(phi) = &s.phi {
                write_bin(
                    &snap_dir.join(format!("{i:04}_phi.bin")),
                    StoredField::Real(phi.clone()),
                )?;
            }
        }
        std::fs::write(snap_dir.join("index.csv"), index)?;
        Ok::<_, CliError>(())
    })?;
    if !record.flags.is_empty() {
        rec.note(record.flags.join("; "));
    }
    Ok(())
}

pub fn wave_operator_cmd(cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Outcome {
    let datum = cfg.datum()?;
    let wcfg = cfg.wave_op_config();
    let mut run = rec.stage("construct", || wave_operator(&datum, &wcfg, &cfg.params))?;
    if !run.warnings.is_empty() {
        rec.note(run.warnings.join("; "));
    }
    for (i, c) in run.cauchy.iter().enumerate() {
        println!(
            "cauchy difference t0 = {:e} -> {:e}: {c:e}",
            run.schedule[i],
            run.schedule[i + 1]
        );
    }
    if cfg.raw.wave_operator.error_columns {
        rec.stage("error-columns", || {
            let series = decay_series(&run, &wcfg.quadrature, &[])?;
            fill_error_columns(&mut run.limit, &series);
            Ok::<_, dollard::Error>(())
        })?;
    }
    rec.stage("write", || run.write_dir(out))?;
    Ok(())
}

fn load_trajectory(cfg: &Resolved, dir: &Path) -> Result<TrajectoryRecord, CliError> {
    let csv = dir.join("trajectory.csv");
    let file = File::open(&csv)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", csv.display())))?;
    let samples = read_samples_csv(file)?;
    let snap_dir = dir.join("snapshots");
    let mut snapshots = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let w = match read_bin(&snap_dir.join(format!("{i:04}_w.bin")))? {
            StoredField::Complex(f) => f,
            _ => {
                return Err(CliError::Usage(format!(
                    "snapshot {i}: w is not a complex field"
                )))
            }
        };
        let s = match read_bin(&snap_dir.join(format!("{i:04}_s.bin")))? {
            StoredField::Vector(f) => f,
            _ => {
                return Err(CliError::Usage(format!(
                    "snapshot {i}: s is not a vector field"
                )))
            }
        };
        let phi_path = snap_dir.join(format!("{i:04}_phi.bin"));
        let phi = if phi_path.exists() {
            match read_bin(&phi_path)? {
                StoredField::Real(f) => Some(f),
                _ => {
                    return Err(CliError::Usage(format!(
                        "snapshot {i}: phi is not a real field"
                    )))
                }
            }
        } else {
            None
        };
        if *w.grid() != cfg.grid {
            return Err(CliError::Usage(format!(
                "snapshot grid {:?} differs from the configured grid {:?}",
                w.grid(),
                cfg.grid
            )));
        }
        snapshots.push(AuxState::new(sample.t, w, s, phi)?);
    }
    Ok(TrajectoryRecord {
        grid: cfg.grid,
        params: cfg.params,
        pair: cfg.pair,
        initial_mass: samples.first().map(|s| s.mass).unwrap_or(0.0),
        samples,
        snapshots,
        final_state: None,
        failure: None,
        flags: Vec::new(),
        steps: 0,
    })
}

#[derive(Serialize)]
struct ExtractSummary {
    trajectory: String,
    t_max: f64,
    /// `|w(t_max) - w(t')|_{k-1}` with `t'` near `t_max / 2`
    w_plus_proxy: f64,
    w_plus_flagged: bool,
    w_plus_norm_km1: f64,
    s02_at_1_norm_lm1: f64,
    s0_tail_norm: f64,
}

pub fn extract_asymptotics(cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Outcome {
    let dir = cfg.trajectory_dir()?;
    let traj = rec.stage("load", || load_trajectory(cfg, &dir))?;
    let (k, l) = (cfg.pair.k, cfg.pair.l);
    let quad = cfg.raw.quadrature;
    let est = rec.stage("w_plus", || {
        extract_w_plus(&traj, cfg.raw.extract.tolerance)
    })?;
    if est.flagged {
        rec.note(format!("error proxy {:e} above tolerance", est.proxy));
    }
    let (s02_1, s02) = rec.stage("s02", || {
        extract_s02_at_1(&traj, &est.w_plus, &cfg.params, &quad)
    })?;
    let s0 = rec.stage("s0", || extract_s0(&traj, &est.w_plus, &cfg.params))?;
    rec.stage("write", || {
        write_bin(
            &out.join("w_plus.bin"),
            StoredField::Complex(est.w_plus.clone()),
        )?;
        write_bin(
            &out.join("s02_at_1.bin"),
            StoredField::Vector(s02_1.clone()),
        )?;
        let mut csv = String::from("t,norm_s0_lm1,norm_s02_lm1\n");
        for ((t, a), b) in s0.times.iter().zip(&s0.fields).zip(&s02.fields) {
            let lm1 = l.saturating_sub(1);
            csv.push_str(&format!(
                "{t:e},{:e},{:e}\n",
                x_norm(a, lm1),
                x_norm(b, lm1)
            ));
        }
        std::fs::write(out.join("velocity.csv"), csv)?;
        write_json(
            &out.join("extract.json"),
            &ExtractSummary {
                trajectory: dir.display().to_string(),
                t_max: est.t_max,
                w_plus_proxy: est.proxy,
                w_plus_flagged: est.flagged,
                w_plus_norm_km1: sobolev_norm(&est.w_plus, k.saturating_sub(1)),
                s02_at_1_norm_lm1: x_norm(&s02_1, l.saturating_sub(1)),
                s0_tail_norm: s0.tail_norm,
            },
        )
    })?;
    Ok(())
}

fn gate(table: &VerdictTable) -> Outcome {
    for v in &table.verdicts {
        println!("{}", v.summary_line());
    }
    if table.all_pass() {
        Ok(())
    } else {
        let ids: Vec<&str> = table.failures().map(|v| v.claim_id.as_str()).collect();
        Err(CliError::Gate(ids.join(", ")))
    }
}

pub fn verify_rates(cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Outcome {
    let table = rec.stage("suite", || run_acceptance_suite(&cfg.raw.suite, Some(out)))?;
    rec.stage("gate", || gate(&table))
}

pub fn check_identities(cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Outcome {
    let mut suite = cfg.raw.suite.clone();
    suite.criteria = vec![1];
    let table = rec.stage("identities", || run_acceptance_suite(&suite, Some(out)))?;
    rec.stage("gate", || gate(&table))
}

pub fn cross_check(cfg: &Resolved, out: &Path, rec: &mut Recorder) -> Outcome {
    let record = rec.stage("integrate", || simulate(cfg, "cross-check"))?;
    let cc = &cfg.raw.cross_check;
    let check = rec.stage("direct-solver", || {
        cross_check_gauge(&record, &cfg.params, cc.rel_step)
    })?;
    let table = VerdictTable::new(vec![Verdict::bound(
        "cross_check.v_discrepancy",
        check.max_relative(),
        cc.tolerance,
    )]);
    rec.stage("write", || {
        let mut csv = String::from("t,discrepancy,mass,relative\n");
        for ((t, d), m) in check.times.iter().zip(&check.discrepancy).zip(&check.mass) {
            let rel = if *m > 0.0 { d / m } else { *d };
            csv.push_str(&format!("{t:e},{d:e},{m:e},{rel:e}\n"));
        }
        std::fs::write(out.join("cross_check.csv"), csv)?;
        table.write_csv(File::create(out.join("verdicts.csv"))?)?;
        let config_hash = sha256_hex(serde_json::to_string(&cfg.raw)?.as_bytes());
        let report = table.report(config_hash, BTreeMap::new());
        write_json(&out.join("verdicts.json"), &report)
    })?;
    rec.stage("gate", || gate(&table))
}

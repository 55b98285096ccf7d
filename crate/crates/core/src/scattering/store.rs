//! On-disk layout of a wave-operator run.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Calibration, WaveOpRun};
use crate::dynamics::write_samples_csv;
use crate::model::{AdmissiblePair, ModelParams};
use crate::spectral::io::{write_field, StoredField};
use crate::spectral::GridSpec;
use crate::{Error, Result};

pub const DIFFERENCE_COLUMNS: [&str; 3] = ["t0_a", "t0_b", "difference"];

pub fn write_differences_csv<W: Write>(out: W, schedule: &[f64], cauchy: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIFFERENCE_COLUMNS)?;
    for (pair, d) in schedule.windows(2).zip(cauchy) {
        w.write_record([
            format!("{:e}", pair[0]),
            format!("{:e}", pair[1]),
            format!("{d:e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(t0_a, t0_b, difference)` rows.
pub fn read_differences_csv<R: Read>(inp: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut r = csv::Reader::from_reader(inp);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != DIFFERENCE_COLUMNS {
        return Err(Error::Format(format!(
            "difference columns {header:?} do not match"
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let num =
                |i: usize| -> Result<f64> {
                    rec.get(i).unwrap_or("").trim().parse().map_err(|e| {
                        Error::Format(format!("column {}: {e}", DIFFERENCE_COLUMNS[i]))
                    })
                };
            Ok((num(0)?, num(1)?, num(2)?))
        })
        .collect()
}

#[derive(Serialize)]
struct RunSummary<'a> {
    params: &'a ModelParams,
    pair: AdmissiblePair,
    grid: &'a GridSpec,
    schedule: &'a [f64],
    window: (f64, f64),
    calibration: &'a Calibration,
    cauchy: &'a [f64],
    divergent: bool,
    extrapolated: bool,
    warnings: &'a [String],
    seed_steps: Vec<usize>,
}

fn write_bin(path: &Path, field: StoredField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field(&mut out, &field)?;
    out.flush()?;
    Ok(())
}

impl WaveOpRun {
    /// Writes the run summary, per-seed diagnostics, Cauchy differences and
    /// the limit fields at both ends of the window. Returns the files written.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();

        let summary = RunSummary {
            params: &self.params,
            pair: self.pair,
            grid: self.datum.grid(),
            schedule: &self.schedule,
            window: self.window,
            calibration: &self.calibration,
            cauchy: &self.cauchy,
            divergent: self.divergent,
            extrapolated: self.extrapolated,
            warnings: &self.warnings,
            seed_steps: self.seeds.iter().map(|s| s.steps).collect(),
        };
        let path = dir.join("wave_operator.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
        files.push(path);

        for (i, seed) in self.seeds.iter().enumerate() {
            let path = dir.join(format!("seed_{i:02}.csv"));
            write_samples_csv(File::create(&path)?, &seed.samples)?;
            files.push(path);
        }
        let path = dir.join("limit.csv");
        write_samples_csv(File::create(&path)?, &self.limit.samples)?;
        files.push(path);

        let path = dir.join("differences.csv");
        write_differences_csv(File::create(&path)?, &self.schedule, &self.cauchy)?;
        files.push(path);

        let snaps = &self.limit.snapshots;
        let ends = [snaps.first(), snaps.last()];
        for (tag, snap) in ["start", "end"].iter().zip(ends) {
            let Some(snap) = snap else { continue };
            let path = dir.join(format!("limit_{tag}_w.bin"));
            write_bin(&path, StoredField::Complex(snap.w.clone()))?;
            files.push(path);
            let path = dir.join(format!("limit_{tag}_s.bin"));
            write_bin(&path, StoredField::Vector(snap.s.clone()))?;
            files.push(path);
            if let Some(phi) = &snap.phi {
                let path = dir.join(format!("limit_{tag}_phi.bin"));
                write_bin(&path, StoredField::Real(phi.clone()))?;
                files.push(path);
            }
        }
        Ok(files)
    }
}

//! CSV and snapshot files. Floats are written with 17 significant digits
//! so every value reads back bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mobch::diagnostics::EnergyReport;
use mobch::snapshot::{format_f64, write_snapshot};
use mobch::timestepper::Trajectory;

use crate::CliError;

pub const TRAJECTORY_HEADER: &[&str] = &["t", "mass", "energy", "energy_n", "entropy", "h2_norm", "newton_iters"];

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// A CSV file with a header row; each row is written as preformatted cells.
pub struct Csv {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let mut csv = Self {
            out: create(path)?,
            path: path.to_path_buf(),
        };
        csv.line(&header.join(","))?;
        Ok(csv)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        self.line(&cells.join(","))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn f(x: f64) -> String {
    format_f64(x)
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, report: &EnergyReport) -> Result<(), CliError> {
    let mut csv = Csv::create(path, TRAJECTORY_HEADER)?;
    for k in 0..report.times.len() {
        csv.row(&[
            f(report.times[k]),
            f(report.mass[k]),
            f(report.energy[k]),
            f(report.energy_n[k]),
            f(report.entropy[k]),
            f(report.h2[k]),
            traj.newton_iters[k].to_string(),
        ])?;
    }
    csv.finish()
}

/// `u_XXXXXX.txt` and `w_XXXXXX.txt` per snapshot, numbered by snapshot.
pub fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    for (k, s) in traj.states.iter().enumerate() {
        for (name, field) in [("u", &s.u), ("w", &s.w)] {
            let path = dir.join(format!("{name}_{k:06}.txt"));
            let mut out = create(&path)?;
            write_snapshot(&mut out, field, s.t)?;
            out.flush().map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

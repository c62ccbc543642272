//! Run directories: diagnostics CSV, snapshots and the JSON manifest.
//!
//! A run directory produced by [`run_scenario`] contains
//!
//! * `u_NNN.cwf`, `v_NNN.cwf`, one pair per output time reached,
//! * `diagnostics.csv` with the columns of [`COLUMNS`],
//! * `manifest.json`, written last, describing everything above.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsRow, COLUMNS};
use crate::error::{Error, Result};
use crate::integrator::{run, FinalStatus, Trajectory};

use super::scenario::Scenario;
use super::snapshot::{snapshot_path, write_snapshot};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Shortest decimal text that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_diagnostics_csv(rec: &DiagnosticsRecord, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COLUMNS)?;
    for row in &rec.rows {
        let fields: Vec<String> = row
            .values()
            .iter()
            .zip(COLUMNS)
            .map(|(&x, name)| {
                if name == "step" {
                    row.step.to_string()
                } else {
                    fmt_f64(x)
                }
            })
            .collect();
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_diagnostics_csv(path: &Path) -> Result<DiagnosticsRecord> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(Error::validation(
            "diagnostics.csv",
            format!("unexpected header {header:?}"),
        ));
    }
    let rows = r
        .deserialize::<DiagnosticsRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(DiagnosticsRecord { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the run directory.
    pub path: String,
    pub kind: String,
    pub t: Option<f64>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub code_version: String,
    pub wall_time_s: f64,
    pub final_status: FinalStatus,
    pub cause: Option<String>,
    pub final_time: f64,
    pub steps: u64,
    pub peak_linf_u: f64,
    pub files: Vec<OutputFile>,
}

impl RunManifest {
    pub fn file(&self, kind: &str, t: f64) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.kind == kind && f.t == Some(t))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the trajectory's snapshots and diagnostics into `out_dir`, then the
/// manifest. The directory is created if needed.
pub fn write_run(scenario: &Scenario, traj: &Trajectory, out_dir: &Path, wall_time_s: f64) -> Result<RunManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written: Vec<(PathBuf, &str, Option<f64>)> = Vec::new();
    for (k, snap) in traj.snapshots.iter().enumerate() {
        for (kind, field) in [("u", &snap.u), ("v", &snap.v)] {
            let p = snapshot_path(out_dir, kind, k);
            write_snapshot(field, snap.t, kind, &p)?;
            written.push((p, kind, Some(snap.t)));
        }
    }
    let csv_path = out_dir.join(DIAGNOSTICS_FILE);
    write_diagnostics_csv(&traj.diagnostics, &csv_path)?;
    written.push((csv_path, "diagnostics", None));

    let files = written
        .into_iter()
        .map(|(p, kind, t)| {
            Ok(OutputFile {
                sha256: sha256_file(&p)?,
                path: p
                    .file_name()
                    .expect("output files have names")
                    .to_string_lossy()
                    .into_owned(),
                kind: kind.to_string(),
                t,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = RunManifest {
        scenario: scenario.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s,
        final_status: traj.final_status,
        cause: traj.cause.clone(),
        final_time: traj.final_state.t,
        steps: traj.final_state.step,
        peak_linf_u: traj.peak_linf_u,
        files,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Runs a scenario and writes its outputs. Early stops are not errors: the
/// manifest records the final status and whatever snapshots were reached.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunManifest> {
    run_scenario_with_trajectory(scenario, out_dir).map(|(m, _)| m)
}

/// [`run_scenario`], also handing back the in-memory trajectory.
pub fn run_scenario_with_trajectory(scenario: &Scenario, out_dir: &Path) -> Result<(RunManifest, Trajectory)> {
    scenario.validate()?;
    if out_dir.exists() && !out_dir.is_dir() {
        return Err(Error::io(
            out_dir,
            std::io::Error::new(std::io::ErrorKind::AlreadyExists, "output path is not a directory"),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let start = Instant::now();
    let traj = run(
        scenario.initial_state()?,
        &scenario.params()?,
        &scenario.control,
        scenario.t_end,
        &scenario.output_times,
    )?;
    let wall = start.elapsed().as_secs_f64();
    let manifest = write_run(scenario, &traj, out_dir, wall)?;
    Ok((manifest, traj))
}

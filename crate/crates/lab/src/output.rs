//! CSV and JSON-lines writers. Each file is written in one pass by one
//! writer; floats use Rust's shortest round-trip formatting, so identical
//! runs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mckean_core::particles::EmpiricalTrajectory;
use mckean_core::{GridDensity, StationaryMeasure, SweepReport, TrajectoryRecord};
use serde::Serialize;

use crate::error::LabError;

pub fn write_csv<S: AsRef<str>>(
    path: &Path,
    header: &[S],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), LabError> {
    let err = |source| LabError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(err)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// `t, free_energy, dissipation, m1, …, mK`.
pub fn write_trajectory(path: &Path, rec: &TrajectoryRecord) -> Result<(), LabError> {
    let k = rec.moment_history.first().map_or(0, |m| m.order());
    let mut header: Vec<String> = vec!["t".into(), "free_energy".into(), "dissipation".into()];
    header.extend((1..=k).map(|j| format!("m{j}")));
    let rows = (0..rec.len()).map(|i| {
        let mut row = vec![num(rec.times[i]), num(rec.free_energy[i]), num(rec.dissipation[i])];
        row.extend((1..=k).map(|j| num(rec.moment_history[i].get(j))));
        row
    });
    write_csv(path, &header, rows)
}

/// `x,u` at every grid node.
pub fn write_density(path: &Path, u: &GridDensity) -> Result<(), LabError> {
    let g = u.grid();
    write_csv(
        path,
        &["x", "u"],
        u.values().iter().enumerate().map(|(i, &v)| vec![num(g.x(i)), num(v)]),
    )
}

/// `symmetry, m1, m2, free_energy, residual, eta_norm`.
pub fn write_stationary(path: &Path, measures: &[StationaryMeasure]) -> Result<(), LabError> {
    write_csv(
        path,
        &["symmetry", "m1", "m2", "free_energy", "residual", "eta_norm"],
        measures.iter().map(|m| {
            vec![
                m.symmetry.label().to_string(),
                num(m.moments.get(1)),
                num(m.moments.get(2)),
                num(m.free_energy.total),
                num(m.residual),
                num(m.eta_norm),
            ]
        }),
    )
}

/// `t, m1, m2, m3, m4, upsilonN`.
pub fn write_particles(path: &Path, traj: &EmpiricalTrajectory) -> Result<(), LabError> {
    write_csv(
        path,
        &["t", "m1", "m2", "m3", "m4", "upsilonN"],
        (0..traj.times.len()).map(|i| {
            let m = &traj.moment_history[i];
            vec![
                num(traj.times[i]),
                num(m.get(1)),
                num(m.get(2)),
                num(m.get(3)),
                num(m.get(4)),
                num(traj.upsilon_n[i]),
            ]
        }),
    )
}

pub fn write_points(path: &Path, x: &[f64]) -> Result<(), LabError> {
    write_csv(path, &["x"], x.iter().map(|&v| vec![num(v)]))
}

/// `eps, fe_sym, fe_plus, fe_minus, predicted_sym_limit, predicted_asym_limit`.
pub fn write_sweep(path: &Path, s: &SweepReport) -> Result<(), LabError> {
    write_csv(
        path,
        &["eps", "fe_sym", "fe_plus", "fe_minus", "predicted_sym_limit", "predicted_asym_limit"],
        (0..s.eps_values.len()).map(|i| {
            vec![
                num(s.eps_values[i]),
                num(s.fe_sym[i]),
                num(s.fe_plus[i]),
                num(s.fe_minus[i]),
                num(s.predicted_sym_limit),
                num(s.predicted_asym_limit),
            ]
        }),
    )
}

/// One experiment verdict, one JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictLine {
    pub name: String,
    pub hypothesis_ok: bool,
    pub matched_branch: Option<String>,
    pub final_distance: Option<f64>,
    pub fe_limit: Option<f64>,
    pub passed: bool,
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), LabError> {
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("verdicts serialize");
        writeln!(w, "{line}").map_err(|e| LabError::io(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), LabError> {
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

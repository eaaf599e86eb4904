//! Trajectory CSV files: columns `t,x1..xn,u1..um`, one row per grid node.
//!
//! Row `k < N` carries the control on `[t_k, t_{k+1})`; the last row repeats
//! the final control. Values are written with 17 significant digits, so a
//! write/read round trip is bit-exact. A sidecar `<stem>.meta.json` records
//! the dimensions and is checked on read when present.

use std::fs;
use std::path::{Path, PathBuf};

use plab_core::{ControlProcess, Grid, Samples};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TRAJECTORY_SCHEMA: &str = "plab.trajectory/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: String,
    pub n: usize,
    pub m: usize,
    pub intervals: usize,
    pub horizon: f64,
    pub columns: Vec<String>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn columns(n: usize, m: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend((1..=n).map(|i| format!("x{i}")));
    c.extend((1..=m).map(|i| format!("u{i}")));
    c
}

pub fn write_trajectory(path: &Path, proc: &ControlProcess) -> Result<(), CliError> {
    let (n, m, nn) = (proc.n(), proc.m(), proc.grid.intervals());
    let cols = columns(n, m);
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    let fail = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(&cols).map_err(fail)?;
    for k in 0..=nn {
        let mut row = vec![fmt_f64(proc.grid.t(k))];
        row.extend(proc.x.row(k).iter().map(|v| fmt_f64(*v)));
        row.extend(proc.u.row(k.min(nn - 1)).iter().map(|v| fmt_f64(*v)));
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(CliError::io(path))?;
    let meta = Sidecar { schema: TRAJECTORY_SCHEMA.into(), n, m, intervals: nn, horizon: proc.grid.horizon(), columns: cols };
    let side = sidecar_path(path);
    let text = crate::report::to_json_string(&serde_json::to_value(&meta).expect("sidecar serializes"));
    fs::write(&side, text).map_err(CliError::io(side))
}

/// Reads a trajectory; the split between state and control columns comes from
/// the header names.
pub fn read_trajectory(path: &Path) -> Result<ControlProcess, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io { path: path.into(), source: io },
        other => CliError::format(path, format!("{other:?}")),
    })?;
    let header: Vec<String> = r.headers().map_err(|e| CliError::format(path, e.to_string()))?.iter().map(str::to_string).collect();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('u')).count();
    if header != columns(n, m) || m == 0 {
        return Err(CliError::format(path, format!("expected columns t,x1..xn,u1..um, got {}", header.join(","))));
    }
    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut u = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| CliError::format(path, format!("row {}: `{s}` is not a number", line + 1))))
            .collect::<Result<Vec<f64>, _>>()?;
        if vals.len() != 1 + n + m {
            return Err(CliError::format(path, format!("row {} has {} fields, expected {}", line + 1, vals.len(), 1 + n + m)));
        }
        t.push(vals[0]);
        x.push(vals[1..=n].to_vec());
        u.push(vals[1 + n..].to_vec());
    }
    if t.len() < 3 {
        return Err(CliError::format(path, "need at least 3 rows (two intervals)"));
    }
    u.pop();
    let grid = Grid::from_nodes(t).map_err(|e| CliError::format(path, e.to_string()))?;
    let side = sidecar_path(path);
    if side.is_file() {
        let text = fs::read_to_string(&side).map_err(CliError::io(&side))?;
        let meta: Sidecar = serde_json::from_str(&text).map_err(|e| CliError::format(&side, e.to_string()))?;
        if meta.schema != TRAJECTORY_SCHEMA || meta.n != n || meta.m != m || meta.intervals != grid.intervals() {
            return Err(CliError::format(&side, "sidecar does not match the trajectory file"));
        }
    }
    ControlProcess::new(grid, Samples::from_rows(n, &x), Samples::from_rows(m, &u)).map_err(|e| CliError::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use plab_core::trajectory::integrate_forward;
    use plab_core::Catalog;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = Catalog::builtin().build("exp-growth", &[]).unwrap();
        let g = Grid::uniform(1.0, 7).unwrap();
        let u = Samples::from_fn(7, 1, |k| vec![(k as f64 * 0.37).sin()]);
        let proc = integrate_forward(&p, &[1.0], &u, &g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory(&path, &proc).unwrap();
        assert!(sidecar_path(&path).is_file());
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back, proc);
    }

    #[test]
    fn rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,u1,x1\n0,0,0\n0.5,0,0\n1,0,0\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(CliError::Format { .. })));
    }
}

//! Second-order direction files.
//!
//! ```text
//! # beta=1
//! # w=comparison.csv
//! t,h1,h2,u1,v1
//! 0.0,0.0,0.0,0.0,0.0
//! ...
//! ```
//!
//! Header lines `# key=value` carry `beta` (default 0) and an optional
//! comparison control `w`, a trajectory file resolved relative to the
//! direction file. The rows follow the trajectory layout: one per node, the
//! last repeating the final `u` and `v`. Only the first `h` row is used; the
//! variation itself is recomputed from `h(0)`, `u`, `β` and `w`.

use std::fs;
use std::path::{Path, PathBuf};

use plab_core::second_order::CriticalDirection;
use plab_core::{ControlProcess, Grid, Samples};

use crate::error::CliError;
use crate::trajectory_io::{fmt_f64, read_trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionFile {
    pub beta: f64,
    pub w: Option<PathBuf>,
    pub nodes: Vec<f64>,
    pub h: Samples,
    pub u: Samples,
    pub v: Samples,
}

fn columns(n: usize, m: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend((1..=n).map(|i| format!("h{i}")));
    c.extend((1..=m).map(|i| format!("u{i}")));
    c.extend((1..=m).map(|i| format!("v{i}")));
    c
}

impl DirectionFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut beta = 0.0;
        let mut w = None;
        let mut body = String::new();
        for line in text.lines() {
            match line.trim_start().strip_prefix('#') {
                Some(meta) => {
                    let Some((k, v)) = meta.split_once('=') else { continue };
                    match k.trim() {
                        "beta" => {
                            beta = v.trim().parse().map_err(|_| CliError::format(path, format!("bad beta `{}`", v.trim())))?;
                        }
                        "w" => w = Some(path.parent().unwrap_or(Path::new(".")).join(v.trim())),
                        other => return Err(CliError::format(path, format!("unknown header key `{other}`"))),
                    }
                }
                None => {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| CliError::format(path, e.to_string()))?.iter().map(str::to_string).collect();
        let n = header.iter().filter(|h| h.starts_with('h')).count();
        let m = header.iter().filter(|h| h.starts_with('u')).count();
        if header != columns(n, m) || m == 0 || n == 0 {
            return Err(CliError::format(path, format!("expected columns t,h1..hn,u1..um,v1..vm, got {}", header.join(","))));
        }
        let (mut nodes, mut h, mut u, mut v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| CliError::format(path, e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| CliError::format(path, format!("row {}: `{s}` is not a number", line + 1))))
                .collect::<Result<Vec<f64>, _>>()?;
            if vals.len() != 1 + n + 2 * m {
                return Err(CliError::format(path, format!("row {} has {} fields", line + 1, vals.len())));
            }
            nodes.push(vals[0]);
            h.push(vals[1..=n].to_vec());
            u.push(vals[1 + n..1 + n + m].to_vec());
            v.push(vals[1 + n + m..].to_vec());
        }
        if nodes.len() < 3 {
            return Err(CliError::format(path, "need at least 3 rows"));
        }
        u.pop();
        v.pop();
        Ok(Self { beta, w, nodes, h: Samples::from_rows(n, &h), u: Samples::from_rows(m, &u), v: Samples::from_rows(m, &v) })
    }

    /// The direction along `base`; the grid must match node for node.
    pub fn to_direction(&self, path: &Path, base: &ControlProcess) -> Result<CriticalDirection, CliError> {
        let g = &base.grid;
        let tol = 1e-12 * g.horizon();
        if self.nodes.len() != g.nodes().len() || self.nodes.iter().zip(g.nodes()).any(|(a, b)| (a - b).abs() > tol) {
            return Err(CliError::format(path, format!("direction grid does not match the candidate grid ({} intervals)", g.intervals())));
        }
        if self.h.dim() != base.n() || self.u.dim() != base.m() {
            return Err(CliError::format(path, format!("direction needs {} h columns and {} u columns", base.n(), base.m())));
        }
        let w = match &self.w {
            Some(wp) => {
                let wproc = read_trajectory(wp)?;
                if wproc.u.len() != g.intervals() || wproc.m() != base.m() {
                    return Err(CliError::format(wp, "comparison control does not match the candidate grid"));
                }
                wproc.u
            }
            None => base.u.clone(),
        };
        Ok(CriticalDirection::new(self.h.row(0).to_vec(), self.u.clone(), self.beta, w).with_v(self.v.clone()))
    }
}

/// Writes a direction file; `h` has one row per node.
pub fn write_direction(path: &Path, grid: &Grid, beta: f64, w: Option<&str>, h: &Samples, u: &Samples, v: &Samples) -> Result<(), CliError> {
    let nn = grid.intervals();
    let mut out = format!("# beta={}\n", fmt_f64(beta));
    if let Some(w) = w {
        out.push_str(&format!("# w={w}\n"));
    }
    out.push_str(&columns(h.dim(), u.dim()).join(","));
    out.push('\n');
    for k in 0..=nn {
        let mut row = vec![fmt_f64(grid.t(k))];
        row.extend(h.row(k).iter().map(|x| fmt_f64(*x)));
        row.extend(u.row(k.min(nn - 1)).iter().map(|x| fmt_f64(*x)));
        row.extend(v.row(k.min(nn - 1)).iter().map(|x| fmt_f64(*x)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = Grid::uniform(1.0, 4).unwrap();
        let h = Samples::from_fn(5, 2, |k| vec![k as f64 * 0.1, -(k as f64)]);
        let u = Samples::from_fn(4, 1, |k| vec![0.25 * k as f64]);
        let v = Samples::zeros(4, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_direction(&path, &g, 1.0, Some("w.csv"), &h, &u, &v).unwrap();
        let f = DirectionFile::read(&path).unwrap();
        assert_eq!(f.beta, 1.0);
        assert_eq!(f.w, Some(dir.path().join("w.csv")));
        assert_eq!((f.h, f.u, f.v), (h, u, v));
        assert_eq!(f.nodes, g.nodes());
    }
}

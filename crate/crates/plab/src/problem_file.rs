//! JSON problem files and problem lookup.
//!
//! ```json
//! {
//!   "n": 1, "m": 1, "T": 1.0, "l": 0,
//!   "dynamics": ["u1"],
//!   "state_constraints": [],
//!   "endpoint": ["x2", "x1"],
//!   "control_set": { "box": { "lo": [-1.0], "hi": [1.0] } },
//!   "candidate": { "x0": [0.0], "control": [-1.0] }
//! }
//! ```
//!
//! Box bounds may be `null` for an infinite side. Other control sets are
//! `{"finite": [[..], ..]}`, `{"union": {"lo", "hi", "points"}}` and
//! `{"schedule": {"breaks": [..], "regions": [..]}}`.

use std::fs;
use std::path::{Path, PathBuf};

use plab_core::model::catalog::Candidate;
use plab_core::model::control_set::BoxSet;
use plab_core::{Catalog, ControlSet, ProblemSpec, Region};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CATALOG_DIR_ENV: &str = "PLAB_CATALOG_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub summary: Option<String>,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub l: usize,
    pub dynamics: Vec<String>,
    #[serde(default)]
    pub state_constraints: Vec<String>,
    pub endpoint: Vec<String>,
    pub control_set: ControlSetSpec,
    #[serde(default)]
    pub candidate: Option<CandidateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub x0: Vec<f64>,
    pub control: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    Box { lo: Vec<Option<f64>>, hi: Vec<Option<f64>> },
    Finite(Vec<Vec<f64>>),
    Union { lo: Vec<Option<f64>>, hi: Vec<Option<f64>>, points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSetSpec {
    Box { lo: Vec<Option<f64>>, hi: Vec<Option<f64>> },
    Finite(Vec<Vec<f64>>),
    Union { lo: Vec<Option<f64>>, hi: Vec<Option<f64>>, points: Vec<Vec<f64>> },
    Schedule { breaks: Vec<f64>, regions: Vec<RegionSpec> },
}

fn bounds(v: &[Option<f64>], missing: f64) -> Vec<f64> {
    v.iter().map(|b| b.unwrap_or(missing)).collect()
}

impl RegionSpec {
    fn to_region(&self) -> Region {
        match self {
            RegionSpec::Box { lo, hi } => Region::Box(BoxSet::new(bounds(lo, f64::NEG_INFINITY), bounds(hi, f64::INFINITY))),
            RegionSpec::Finite(pts) => Region::Finite(pts.clone()),
            RegionSpec::Union { lo, hi, points } => {
                Region::Union(BoxSet::new(bounds(lo, f64::NEG_INFINITY), bounds(hi, f64::INFINITY)), points.clone())
            }
        }
    }
}

impl ControlSetSpec {
    pub fn to_control_set(&self) -> Result<ControlSet, CliError> {
        let single = |r: RegionSpec| ControlSet::fixed(r.to_region());
        Ok(match self.clone() {
            ControlSetSpec::Box { lo, hi } => single(RegionSpec::Box { lo, hi }),
            ControlSetSpec::Finite(p) => single(RegionSpec::Finite(p)),
            ControlSetSpec::Union { lo, hi, points } => single(RegionSpec::Union { lo, hi, points }),
            ControlSetSpec::Schedule { breaks, regions } => {
                ControlSet::scheduled(regions.iter().map(RegionSpec::to_region).collect(), breaks)
                    .map_err(plab_core::ProblemError::from)?
            }
        })
    }
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
    }

    fn strs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }

    pub fn to_spec(&self, horizon: f64) -> Result<ProblemSpec, CliError> {
        Ok(ProblemSpec::from_sources(
            self.n,
            self.m,
            horizon,
            self.l,
            &Self::strs(&self.dynamics),
            &Self::strs(&self.state_constraints),
            &Self::strs(&self.endpoint),
            self.control_set.to_control_set()?,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Catalog,
    File(PathBuf),
}

/// A resolved problem with the parameter values actually used.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub name: String,
    pub source: ProblemSource,
    pub params: Vec<(String, f64)>,
    pub spec: ProblemSpec,
    pub candidate: Option<Candidate>,
}

/// Looks `name` up in the built-in catalog, then as a file path, then as
/// `<name>.json` under the catalog directory.
pub fn resolve_problem(name: &str, params: &[(String, f64)], catalog_dir: Option<&Path>) -> Result<LoadedProblem, CliError> {
    let overrides: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let catalog = Catalog::builtin();
    if let Some(entry) = catalog.get(name) {
        for (k, _) in params {
            if !entry.params.iter().any(|s| s.name == k) {
                return Err(CliError::Usage(format!("problem `{name}` has no parameter `{k}`")));
            }
        }
        let values = entry.resolve(&overrides)?;
        return Ok(LoadedProblem {
            name: name.to_string(),
            source: ProblemSource::Catalog,
            params: entry.params.iter().zip(values).map(|(s, v)| (s.name.to_string(), v)).collect(),
            spec: entry.build(&overrides)?,
            candidate: Some(entry.candidate(&overrides)?),
        });
    }
    let direct = PathBuf::from(name);
    let path = if direct.is_file() {
        direct
    } else if let Some(p) = catalog_dir.map(|d| d.join(format!("{name}.json"))).filter(|p| p.is_file()) {
        p
    } else {
        return Err(CliError::Problem(plab_core::ProblemError::UnknownEntry(name.to_string())));
    };
    let file = ProblemFile::read(&path)?;
    let mut horizon = file.horizon;
    for (k, v) in params {
        match k.as_str() {
            "T" => horizon = *v,
            _ => return Err(CliError::Usage(format!("problem file {} only accepts the parameter `T`, got `{k}`", path.display()))),
        }
    }
    let spec = file.to_spec(horizon)?;
    let candidate = file.candidate.as_ref().map(|c| Candidate { x0: c.x0.clone(), control: c.control.clone() });
    if let Some(c) = &candidate {
        if c.x0.len() != spec.n || c.control.len() != spec.m {
            return Err(CliError::format(&path, format!("candidate needs x0 of length {} and control of length {}", spec.n, spec.m)));
        }
    }
    let stem = path.file_stem().map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned());
    Ok(LoadedProblem { name: stem, source: ProblemSource::File(path), params: vec![("T".into(), horizon)], spec, candidate })
}

/// A catalog directory entry: file stem and the parse result.
pub type CatalogFile = (String, Result<ProblemFile, CliError>);

/// Problem files found in a catalog directory, sorted by name.
pub fn scan_catalog_dir(dir: &Path) -> Result<Vec<CatalogFile>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let path = entry.map_err(CliError::io(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.push((name, ProblemFile::read(&path)));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LQ: &str = r#"{
        "n": 1, "m": 1, "T": 1.0, "l": 0,
        "dynamics": ["u1"],
        "endpoint": ["x2", "x1"],
        "control_set": {"box": {"lo": [-1.0], "hi": [null]}},
        "candidate": {"x0": [0.0], "control": [-1.0]}
    }"#;

    #[test]
    fn parses_box_with_open_side() {
        let f: ProblemFile = serde_json::from_str(LQ).unwrap();
        let p = f.to_spec(2.0).unwrap();
        assert_eq!(p.horizon, 2.0);
        match &p.control_set.regions()[0] {
            Region::Box(b) => assert_eq!(b.hi[0], f64::INFINITY),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_schedule() {
        let s: ControlSetSpec =
            serde_json::from_str(r#"{"schedule": {"breaks": [0.5], "regions": [{"finite": [[0.0]]}, {"box": {"lo": [0.0], "hi": [1.0]}}]}}"#)
                .unwrap();
        let cs = s.to_control_set().unwrap();
        assert!(cs.is_time_dependent());
        assert_eq!(cs.breaks(), &[0.5]);
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(serde_json::from_str::<ProblemFile>(&LQ.replace("\"l\": 0", "\"l\": 0, \"extra\": 1")).is_err());
    }

    #[test]
    fn catalog_parameters_are_checked() {
        assert!(matches!(resolve_problem("lq-scalar", &[("nope".into(), 1.0)], None), Err(CliError::Usage(_))));
        let p = resolve_problem("lq-scalar", &[("T".into(), 2.0)], None).unwrap();
        assert_eq!(p.spec.horizon, 2.0);
        assert_eq!(p.params, vec![("T".to_string(), 2.0), ("x0".to_string(), 0.0)]);
    }
}

//! Built-in problems with named numeric parameters.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use super::control_set::ControlSet;
use super::problem::{ProblemError, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

/// Default candidate process: initial state and a constant control.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x0: Vec<f64>,
    pub control: Vec<f64>,
}

type Builder = fn(&[f64]) -> Result<ProblemSpec, ProblemError>;
type CandidateFn = fn(&[f64]) -> Candidate;

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSlot>,
    builder: Builder,
    candidate: CandidateFn,
}

impl core::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CatalogEntry").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl CatalogEntry {
    /// Parameter vector with `overrides` applied over the defaults.
    pub fn resolve(&self, overrides: &[(&str, f64)]) -> Result<Vec<f64>, ProblemError> {
        let mut vals: Vec<f64> = self.params.iter().map(|p| p.default).collect();
        for (k, v) in overrides {
            let i = self
                .params
                .iter()
                .position(|p| p.name == *k)
                .ok_or_else(|| ProblemError::UnknownParam(k.to_string()))?;
            vals[i] = *v;
        }
        Ok(vals)
    }

    pub fn build(&self, overrides: &[(&str, f64)]) -> Result<ProblemSpec, ProblemError> {
        (self.builder)(&self.resolve(overrides)?)
    }

    pub fn candidate(&self, overrides: &[(&str, f64)]) -> Result<Candidate, ProblemError> {
        Ok((self.candidate)(&self.resolve(overrides)?))
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

const fn slot(name: &'static str, default: f64, doc: &'static str) -> ParamSlot {
    ParamSlot { name, default, doc }
}

impl Catalog {
    pub fn builtin() -> Self {
        let entries = vec![
            CatalogEntry {
                name: "example-5-1",
                summary: "min x2(T); x1' = u, x2' = x1 sin(2 pi u); U = [0,1]; x(0) = 0. Weak but not strong minimum at u = 0",
                params: vec![slot("T", 1.0, "horizon")],
                builder: |p| {
                    ProblemSpec::from_sources(
                        2,
                        1,
                        p[0],
                        0,
                        &["u1", "x1*sin(2*pi*u1)"],
                        &[],
                        &["x4", "x1", "x2"],
                        ControlSet::boxed(vec![0.0], vec![1.0]),
                    )
                },
                candidate: |_| Candidate { x0: vec![0.0, 0.0], control: vec![0.0] },
            },
            CatalogEntry {
                name: "lq-scalar",
                summary: "min x(T); x' = u; U = [-1,1]; x(0) = x0 as an endpoint equality. Optimum u = -1",
                params: vec![slot("T", 1.0, "horizon"), slot("x0", 0.0, "initial state")],
                builder: |p| {
                    ProblemSpec::from_sources(
                        1,
                        1,
                        p[0],
                        0,
                        &["u1"],
                        &[],
                        &["x2", &format!("x1 - {:?}", p[1])],
                        ControlSet::boxed(vec![-1.0], vec![1.0]),
                    )
                },
                candidate: |p| Candidate { x0: vec![p[1]], control: vec![-1.0] },
            },
            CatalogEntry {
                name: "relax-demo",
                summary: "x' = u; U = [0,1]; cost x(T). Chattering between u = 0 and u1 = 1 with weight alpha",
                params: vec![slot("T", 1.0, "horizon"), slot("alpha", 0.5, "relaxation weight")],
                builder: |p| {
                    ProblemSpec::from_sources(1, 1, p[0], 0, &["u1"], &[], &["x2"], ControlSet::boxed(vec![0.0], vec![1.0]))
                },
                candidate: |_| Candidate { x0: vec![0.0], control: vec![0.0] },
            },
            CatalogEntry {
                name: "unreachable-endpoint",
                summary: "x' = 0; U = [-1,1]; x(0) = 0 and x(T) = target as equalities; zero cost. Infeasible for target != 0",
                params: vec![slot("T", 1.0, "horizon"), slot("target", 1.0, "required terminal state")],
                builder: |p| {
                    ProblemSpec::from_sources(
                        1,
                        1,
                        p[0],
                        0,
                        &["0*u1"],
                        &[],
                        &["0", "x1", &format!("x2 - {:?}", p[1])],
                        ControlSet::boxed(vec![-1.0], vec![1.0]),
                    )
                },
                candidate: |_| Candidate { x0: vec![0.0], control: vec![0.0] },
            },
            CatalogEntry {
                name: "exp-growth",
                summary: "x' = a x + u; U = [-1,1]; cost x(T); x(0) = 1",
                params: vec![slot("T", 1.0, "horizon"), slot("a", 1.0, "growth rate")],
                builder: |p| {
                    ProblemSpec::from_sources(
                        1,
                        1,
                        p[0],
                        0,
                        &[&format!("{:?}*x1 + u1", p[1])],
                        &[],
                        &["x2", "x1 - 1"],
                        ControlSet::boxed(vec![-1.0], vec![1.0]),
                    )
                },
                candidate: |_| Candidate { x0: vec![1.0], control: vec![0.0] },
            },
            CatalogEntry {
                name: "state-bound",
                summary: "min -x(T); x' = u; U = [-1,1]; x(0) = 0; state constraint x <= c. Optimum rides the bound after t = c",
                params: vec![slot("T", 1.0, "horizon"), slot("c", 0.5, "state bound")],
                builder: |p| {
                    ProblemSpec::from_sources(
                        1,
                        1,
                        p[0],
                        0,
                        &["u1"],
                        &[&format!("x1 - {:?}", p[1])],
                        &["-x2", "x1"],
                        ControlSet::boxed(vec![-1.0], vec![1.0]),
                    )
                },
                candidate: |_| Candidate { x0: vec![0.0], control: vec![0.0] },
            },
        ];
        Self { entries }
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn build(&self, name: &str, overrides: &[(&str, f64)]) -> Result<ProblemSpec, ProblemError> {
        self.get(name).ok_or_else(|| ProblemError::UnknownEntry(name.to_string()))?.build(overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds() {
        let c = Catalog::builtin();
        for e in c.entries() {
            let p = e.build(&[]).unwrap();
            let cand = e.candidate(&[]).unwrap();
            assert_eq!(cand.x0.len(), p.n, "{}", e.name);
            assert_eq!(cand.control.len(), p.m, "{}", e.name);
        }
        assert!(c.get("example-5-1").is_some());
        assert!(c.get("lq-scalar").is_some());
    }

    #[test]
    fn parameters_override_defaults() {
        let c = Catalog::builtin();
        let p = c.build("lq-scalar", &[("T", 2.0)]).unwrap();
        assert_eq!(p.horizon, 2.0);
        assert!(matches!(c.build("lq-scalar", &[("nope", 1.0)]), Err(ProblemError::UnknownParam(_))));
        assert!(matches!(c.build("nope", &[]), Err(ProblemError::UnknownEntry(_))));
        let p = c.build("unreachable-endpoint", &[("target", -0.5)]).unwrap();
        assert_eq!(p.ell(&[0.0], &[0.0]).unwrap(), vec![0.0, 0.0, 0.5]);
    }
}

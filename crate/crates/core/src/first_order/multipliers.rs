//! Multiplier extraction as a finite linear feasibility problem.
//!
//! Unknowns are the endpoint weights `λⱼ` (inactive inequalities dropped) and
//! node weights `μᵢₙ` on the active set. The costate is linear in them, so each
//! unknown gets one precomputed adjoint response. Rows are transversality at
//! `t = 0`, the normalization `Σ|λ| + Σμ = 1`, and one integral inequality per
//! comparison control `w`:
//!
//! ```text
//! ∫ ⟨p(t), f(t,x̄,ū) − f(t,x̄,w)⟩ dt ≥ 0.
//! ```
//!
//! Equality multipliers get a fixed sign per LP (all sign patterns are tried),
//! which keeps `|λⱼ|` linear. Comparison rows enter lazily as cuts.

use alloc::vec;
use alloc::vec::Vec;

use super::adjoint::{AdjointOperator, Costate};
use super::{integrate_adjoint, FirstOrderError, Measure, MultiplierTuple};
use crate::grid::Samples;
use crate::lp::{Lp, LpOutcome, Rel};
use crate::math;
use crate::model::problem::ProblemSpec;
use crate::trajectory::ControlProcess;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Lambda { index: usize, free: bool },
    Mu { constraint: usize, node: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierConfig {
    /// Lattice points per control coordinate for the default comparison controls.
    pub per_axis: usize,
    /// Relative activity tolerance for inequalities and state constraints.
    pub tol_active: f64,
    pub max_equalities: usize,
    /// Comparison rows added per cut round.
    pub cut_batch: usize,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self { per_axis: 9, tol_active: 1e-6, max_equalities: 10, cut_batch: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierOutcome {
    Feasible(MultiplierTuple),
    /// No normalized tuple satisfies the rows; `rows` counts the comparison rows in force.
    Infeasible { rows: usize },
}

impl MultiplierOutcome {
    pub fn tuple(&self) -> Option<&MultiplierTuple> {
        match self {
            MultiplierOutcome::Feasible(t) => Some(t),
            MultiplierOutcome::Infeasible { .. } => None,
        }
    }
}

/// Controls equal to `ū` except on one interval, where they take a lattice
/// value of `U` (every point for finite sets).
pub fn comparison_controls(p: &ProblemSpec, base: &ControlProcess, per_axis: usize) -> Vec<Samples> {
    let grid = &base.grid;
    let mut out = Vec::new();
    for k in 0..grid.intervals() {
        let ub = base.u.row(k);
        let region = p.control_set.on_interval(grid.t(k), grid.t(k + 1));
        for v in region.lattice(per_axis, ub) {
            if v.as_slice() != ub {
                let mut w = base.u.clone();
                w.row_mut(k).copy_from_slice(&v);
                out.push(w);
            }
        }
    }
    out
}

const CUT_TOL: f64 = 1e-10;
const FIX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSystem {
    pub columns: Vec<Column>,
    /// Costate generated by a unit value of each column.
    pub responses: Vec<Costate>,
    transversality: Vec<Vec<f64>>,
    cuts: Vec<Vec<f64>>,
    nlambda: usize,
}

impl MultiplierSystem {
    pub fn new(p: &ProblemSpec, base: &ControlProcess, comparisons: &[Samples], cfg: &MultiplierConfig) -> Result<Self, FirstOrderError> {
        let grid = &base.grid;
        let nn = grid.intervals();
        let n = p.n;
        let op = AdjointOperator::new(p, base)?;
        let ell = p.ell(base.x0(), base.xt()).map_err(FirstOrderError::Endpoint)?;

        let mut columns = Vec::new();
        let mut responses = Vec::new();
        let mut transversality = vec![Vec::new(); n];
        for j in 0..=p.r() {
            let free = j > p.l;
            if j >= 1 && !free && ell[j] < -cfg.tol_active * (1.0 + ell[j].abs()) {
                continue;
            }
            let g = p.ell_grad(j, base.x0(), base.xt()).map_err(FirstOrderError::Endpoint)?;
            let resp = op.backward(&math::scale(-1.0, &g[n..]), &[]);
            for i in 0..n {
                transversality[i].push(resp.left(0)[i] - g[i]);
            }
            columns.push(Column::Lambda { index: j, free });
            responses.push(resp);
        }
        let nlambda = columns.len();

        let mut gvals = Vec::with_capacity(nn + 1);
        let mut gmax: f64 = 0.0;
        for k in 0..=nn {
            let g = p.g(grid.t(k), base.x.row(k)).map_err(|source| FirstOrderError::Expr { interval: k, source })?;
            gmax = gmax.max(math::norm_inf(&g));
            gvals.push(g);
        }
        let active = cfg.tol_active * (1.0 + gmax);
        for i in 0..p.s() {
            for (k, g) in gvals.iter().enumerate() {
                if g[i] < -active {
                    continue;
                }
                let gx = p.g_x(i, grid.t(k), base.x.row(k)).map_err(|source| FirstOrderError::Expr { interval: k, source })?;
                let resp = op.backward(&vec![0.0; n], &[(k, gx)]);
                for r in 0..n {
                    transversality[r].push(resp.left(0)[r]);
                }
                columns.push(Column::Mu { constraint: i, node: k });
                responses.push(resp);
            }
        }

        // Right limits, cached per column.
        let rights: Vec<Vec<Vec<f64>>> = responses.iter().map(|c| (0..=nn).map(|k| c.right(k)).collect()).collect();
        let mut raw = Vec::with_capacity(comparisons.len());
        for (index, w) in comparisons.iter().enumerate() {
            if w.len() != nn || w.dim() != p.m {
                return Err(FirstOrderError::ComparisonShape { index });
            }
            let mut row = vec![0.0; columns.len()];
            for k in 0..nn {
                let (ub, wk) = (base.u.row(k), w.row(k));
                if ub == wk {
                    continue;
                }
                let h = grid.step(k);
                let err = |source| FirstOrderError::Expr { interval: k, source };
                let (xl, xr) = (base.x.row(k), base.x.row(k + 1));
                let dl = math::sub(&p.f(grid.t(k), xl, ub).map_err(err)?, &p.f(grid.t(k), xl, wk).map_err(err)?);
                let dr = math::sub(&p.f(grid.t(k + 1), xr, ub).map_err(err)?, &p.f(grid.t(k + 1), xr, wk).map_err(err)?);
                for (c, v) in row.iter_mut().enumerate() {
                    *v += 0.5 * h * (math::dot(&rights[c][k], &dl) + math::dot(responses[c].left(k + 1), &dr));
                }
            }
            raw.push(row);
        }
        let cuts = normalize_rows(raw, 1e-12 * grid.horizon().max(1.0));
        Ok(Self { columns, responses, transversality, cuts, nlambda })
    }

    pub fn cut_count(&self) -> usize {
        self.cuts.len()
    }

    fn free_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|c| matches!(self.columns[*c], Column::Lambda { free: true, .. })).collect()
    }

    fn patterns(&self, cfg: &MultiplierConfig) -> Result<Vec<Vec<f64>>, FirstOrderError> {
        let free = self.free_columns();
        if free.len() > cfg.max_equalities {
            return Err(FirstOrderError::TooManyEqualities { count: free.len(), max: cfg.max_equalities });
        }
        Ok((0..1usize << free.len())
            .map(|mask| {
                let mut s = vec![1.0; self.columns.len()];
                for (bit, c) in free.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        s[*c] = -1.0;
                    }
                }
                s
            })
            .collect())
    }

    fn build(&self, signs: &[f64], fixes: &[(Vec<f64>, f64)], active: &[bool]) -> Lp {
        let nc = self.columns.len();
        let signed = |row: &[f64]| -> Vec<f64> { row.iter().zip(signs).map(|(a, s)| a * s).collect() };
        let mut lp = Lp::new(nc);
        for row in &self.transversality {
            lp.add(signed(row), Rel::Eq, 0.0);
        }
        lp.add(vec![1.0; nc], Rel::Eq, 1.0);
        for (c, rhs) in fixes {
            lp.add(c.clone(), Rel::Le, *rhs);
        }
        for (row, on) in self.cuts.iter().zip(active) {
            if *on {
                lp.add(signed(row), Rel::Ge, 0.0);
            }
        }
        lp
    }

    /// Optimize `obj·ν` with comparison rows added until none is violated.
    fn solve_stage(
        &self,
        signs: &[f64],
        fixes: &[(Vec<f64>, f64)],
        active: &mut [bool],
        obj: &[f64],
        maximize: bool,
        cfg: &MultiplierConfig,
    ) -> Result<Option<(Vec<f64>, f64)>, FirstOrderError> {
        loop {
            let lp = self.build(signs, fixes, active);
            let out = if maximize { lp.maximize(obj) } else { lp.minimize(obj) };
            let out = out.map_err(|source| FirstOrderError::Lp { source, rows: lp.rows.len(), cols: lp.nvars })?;
            let (nu, value) = match out {
                LpOutcome::Optimal { x, value } => (x, value),
                LpOutcome::Infeasible { .. } | LpOutcome::Unbounded => return Ok(None),
            };
            let y: Vec<f64> = nu.iter().zip(signs).map(|(a, s)| a * s).collect();
            let mut violated: Vec<(f64, usize)> = self
                .cuts
                .iter()
                .enumerate()
                .filter(|(i, _)| !active[*i])
                .map(|(i, row)| (math::dot(row, &y), i))
                .filter(|(v, _)| *v < -CUT_TOL)
                .collect();
            if violated.is_empty() {
                return Ok(Some((nu, value)));
            }
            violated.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (_, i) in violated.into_iter().take(cfg.cut_batch.max(1)) {
                active[i] = true;
            }
        }
    }

    /// Lexicographically smallest `(λ₀, …, λ_r, Σμ)` for one sign pattern.
    fn lexicographic(&self, signs: &[f64], cfg: &MultiplierConfig) -> Result<Option<Vec<f64>>, FirstOrderError> {
        let nc = self.columns.len();
        let mut objectives: Vec<Vec<f64>> = (0..self.nlambda)
            .map(|c| {
                let mut o = vec![0.0; nc];
                o[c] = signs[c];
                o
            })
            .collect();
        if nc > self.nlambda {
            let mut o = vec![0.0; nc];
            o[self.nlambda..].iter_mut().for_each(|v| *v = 1.0);
            objectives.push(o);
        }
        let mut fixes = Vec::new();
        let mut active = vec![false; self.cuts.len()];
        let mut last = None;
        for obj in objectives {
            match self.solve_stage(signs, &fixes, &mut active, &obj, false, cfg)? {
                Some((nu, value)) => {
                    fixes.push((obj, value + FIX_SLACK * (1.0 + value.abs())));
                    last = Some(nu);
                }
                None if last.is_none() => return Ok(None),
                None => break,
            }
        }
        Ok(last.map(|nu| nu.iter().zip(signs).map(|(a, s)| a * s).collect()))
    }

    /// Signed column values of the selected multiplier, or `None` if infeasible.
    pub fn select(&self, cfg: &MultiplierConfig) -> Result<Option<Vec<f64>>, FirstOrderError> {
        let mut best: Option<Vec<f64>> = None;
        for signs in self.patterns(cfg)? {
            if let Some(y) = self.lexicographic(&signs, cfg)? {
                if best.as_ref().map_or(true, |b| self.key_less(&y, b)) {
                    best = Some(y);
                }
            }
        }
        Ok(best)
    }

    fn key(&self, y: &[f64]) -> Vec<f64> {
        let mut k = y[..self.nlambda].to_vec();
        k.push(y[self.nlambda..].iter().sum());
        k
    }

    fn key_less(&self, a: &[f64], b: &[f64]) -> bool {
        for (x, y) in self.key(a).iter().zip(&self.key(b)) {
            if (x - y).abs() > FIX_SLACK * (1.0 + y.abs()) {
                return x < y;
            }
        }
        false
    }

    /// `max Σ a_c y_c` over the normalized multiplier set (all sign patterns).
    pub fn maximize(&self, a: &[f64], cfg: &MultiplierConfig) -> Result<Option<(f64, Vec<f64>)>, FirstOrderError> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for signs in self.patterns(cfg)? {
            let obj: Vec<f64> = a.iter().zip(&signs).map(|(v, s)| v * s).collect();
            let mut active = vec![false; self.cuts.len()];
            if let Some((nu, value)) = self.solve_stage(&signs, &[], &mut active, &obj, true, cfg)? {
                if best.as_ref().map_or(true, |(b, _)| value > *b) {
                    best = Some((value, nu.iter().zip(&signs).map(|(v, s)| v * s).collect()));
                }
            }
        }
        Ok(best)
    }

    /// Whether a normalized tuple exists using only the columns `keep` accepts.
    pub fn feasible_with(&self, keep: impl Fn(Column) -> bool, cfg: &MultiplierConfig) -> Result<bool, FirstOrderError> {
        let nc = self.columns.len();
        let fixes: Vec<(Vec<f64>, f64)> = (0..nc)
            .filter(|c| !keep(self.columns[*c]))
            .map(|c| {
                let mut o = vec![0.0; nc];
                o[c] = 1.0;
                (o, 0.0)
            })
            .collect();
        for signs in self.patterns(cfg)? {
            let mut active = vec![false; self.cuts.len()];
            if self.solve_stage(&signs, &fixes, &mut active, &vec![0.0; nc], false, cfg)?.is_some() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Assemble the tuple for signed column values `y`; the costate is re-integrated.
    pub fn tuple(&self, p: &ProblemSpec, base: &ControlProcess, y: &[f64]) -> Result<MultiplierTuple, FirstOrderError> {
        let mut lambdas = vec![0.0; p.r() + 1];
        let mut measures: Vec<Measure> = Vec::new();
        for (col, v) in self.columns.iter().zip(y) {
            match *col {
                Column::Lambda { index, .. } => lambdas[index] = *v,
                Column::Mu { constraint, node } => {
                    if *v == 0.0 {
                        continue;
                    }
                    match measures.iter_mut().find(|m| m.constraint == constraint) {
                        Some(m) => {
                            m.nodes.push(node);
                            m.weights.push(*v);
                        }
                        None => measures.push(Measure { constraint, nodes: vec![node], weights: vec![*v] }),
                    }
                }
            }
        }
        measures.sort_by_key(|m| m.constraint);
        let costate = integrate_adjoint(p, base, &lambdas, &measures)?;
        Ok(MultiplierTuple { lambdas, measures, costate })
    }
}

/// Scale rows to unit max-norm, drop the ones below `floor` and near-duplicates.
fn normalize_rows(raw: Vec<Vec<f64>>, floor: f64) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = raw
        .into_iter()
        .filter_map(|r| {
            let s = math::norm_inf(&r);
            (s > floor).then(|| math::scale(1.0 / s, &r))
        })
        .collect();
    rows.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            let o = x.total_cmp(y);
            if o.is_ne() {
                return o;
            }
        }
        core::cmp::Ordering::Equal
    });
    rows.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-12));
    rows
}

/// Normalized multipliers for `base` against the given comparison controls.
pub fn extract_multipliers(
    p: &ProblemSpec,
    base: &ControlProcess,
    comparisons: &[Samples],
    cfg: &MultiplierConfig,
) -> Result<MultiplierOutcome, FirstOrderError> {
    let sys = MultiplierSystem::new(p, base, comparisons, cfg)?;
    Ok(match sys.select(cfg)? {
        Some(y) => MultiplierOutcome::Feasible(sys.tuple(p, base, &y)?),
        None => MultiplierOutcome::Infeasible { rows: sys.cut_count() },
    })
}

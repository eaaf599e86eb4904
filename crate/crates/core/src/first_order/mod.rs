//! First-order certificates: Hamiltonian maximization, the costate with
//! state-constraint measures, multiplier extraction as a linear feasibility
//! problem, maximum-principle residuals and the Bolza stationarity check.
//!
//! With `H(t,x,p,u) = ⟨p, f(t,x,u)⟩` and multipliers `(λ, μ)`, the costate solves
//!
//! ```text
//! ṗ = −f_xᵀ(t, x̄, ū) p,     p(T+) = −Σ λⱼ ∂ℓⱼ/∂x(T),     p(0) = Σ λⱼ ∂ℓⱼ/∂x(0),
//! p(tₙ+) − p(tₙ) = Σᵢ g_ix(tₙ, x̄(tₙ)) μᵢ({tₙ}).
//! ```

mod adjoint;
mod bolza;
mod multipliers;

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Samples;
use crate::lp::LpError;
use crate::math;
use crate::model::control_set::Region;
use crate::model::expr::ExprError;
use crate::model::problem::ProblemSpec;
use crate::trajectory::{ControlProcess, TrajectoryError};

pub use adjoint::{AdjointOperator, Costate};
pub use bolza::{bolza_stationarity_check, BolzaModel, BolzaReport, BolzaWitness};
pub use multipliers::{
    comparison_controls, extract_multipliers, Column, MultiplierConfig, MultiplierOutcome, MultiplierSystem,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FirstOrderError {
    #[error("derivative evaluation failed on interval {interval}: {source}")]
    Expr { interval: usize, source: ExprError },
    #[error("endpoint derivative failed: {0}")]
    Endpoint(ExprError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("multiplier LP with {rows} rows and {cols} columns failed: {source}")]
    Lp { source: LpError, rows: usize, cols: usize },
    #[error("adjoint propagator on interval {interval} is singular")]
    SingularPropagator { interval: usize },
    #[error("{count} equality multipliers exceed the sign-pattern limit {max}")]
    TooManyEqualities { count: usize, max: usize },
    #[error("comparison control {index} has the wrong shape")]
    ComparisonShape { index: usize },
    #[error("multiplier has {got} endpoint weights, expected {expected}")]
    LambdaCount { got: usize, expected: usize },
}

pub fn hamiltonian(p: &ProblemSpec, t: f64, x: &[f64], pvec: &[f64], u: &[f64]) -> Result<f64, ExprError> {
    Ok(math::dot(pvec, &p.f(t, x, u)?))
}

/// Search settings for `Ĥ = sup_{u∈U} H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupConfig {
    /// Approximate number of lattice starts over a box.
    pub starts: usize,
    /// Extra exhaustive lattice with this spacing (boxes only).
    pub lattice_step: Option<f64>,
    pub ascent_iters: usize,
    pub golden_iters: usize,
}

impl Default for SupConfig {
    fn default() -> Self {
        Self { starts: 32, lattice_step: None, ascent_iters: 50, golden_iters: 60 }
    }
}

const MAX_LATTICE: usize = 1_000_000;

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

struct Best {
    value: f64,
    u: Vec<f64>,
}

impl Best {
    fn offer(best: &mut Option<Best>, value: f64, u: &[f64]) {
        match best {
            None => *best = Some(Best { value, u: u.to_vec() }),
            Some(b) => {
                let tie = 1e-14 * (1.0 + b.value.abs());
                if value > b.value + tie || ((value - b.value).abs() <= tie && lex_less(u, &b.u)) {
                    b.value = value;
                    b.u = u.to_vec();
                }
            }
        }
    }
}

/// `Ĥ(t,x,p)` over `region` and a maximizer. Finite point sets are searched
/// exhaustively. A box is searched by projected ascent from a lattice plus
/// corners, refined by golden section along each coordinate. Infinite bounds
/// are searched within one unit of the origin. Ties go to the
/// lexicographically smallest control.
pub fn hamiltonian_sup(
    p: &ProblemSpec,
    t: f64,
    x: &[f64],
    pvec: &[f64],
    region: &Region,
    cfg: &SupConfig,
) -> Result<(f64, Vec<f64>), ExprError> {
    let h = |u: &[f64]| hamiltonian(p, t, x, pvec, u);
    let mut best: Option<Best> = None;
    for pt in region.points() {
        Best::offer(&mut best, h(pt)?, pt);
    }
    if region.box_part().is_some() {
        let anchor = vec![0.0; p.m];
        let (lo, hi) = region.box_bounds(&anchor).expect("box part present");
        let m = p.m;
        let mut per_axis: usize = 2;
        while m > 0 && per_axis.pow(m as u32) < cfg.starts {
            per_axis += 1;
        }
        let spacing: Vec<f64> = (0..m).map(|i| (hi[i] - lo[i]) / (per_axis - 1) as f64).collect();
        let grad = |u: &[f64]| -> Result<Vec<f64>, ExprError> {
            let (_, fu) = p.f_jac(t, x, u)?;
            Ok(fu.tmul_vec(pvec))
        };
        let clamp = |u: &mut [f64]| {
            for i in 0..m {
                u[i] = u[i].clamp(lo[i], hi[i]);
            }
        };
        for start in region.lattice(per_axis, &anchor) {
            if start.len() != m || !in_box(&start, &lo, &hi) {
                continue;
            }
            let mut u = start;
            let mut v = h(&u)?;
            Best::offer(&mut best, v, &u);
            let g0 = grad(&u)?;
            if g0.iter().all(|c| *c == 0.0) {
                continue;
            }
            // projected ascent with an adaptive step
            let mut g = g0;
            let mut step = spacing.iter().fold(0.0f64, |a, b| a.max(*b)).max(1e-3);
            for _ in 0..cfg.ascent_iters {
                let gn = math::norm_inf(&g);
                if gn == 0.0 {
                    break;
                }
                let mut moved = false;
                for _ in 0..30 {
                    let mut cand: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a + step * b / gn).collect();
                    clamp(&mut cand);
                    if cand == u {
                        break;
                    }
                    let vc = h(&cand)?;
                    if vc > v {
                        u = cand;
                        v = vc;
                        moved = true;
                        step *= 2.0;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
                g = grad(&u)?;
            }
            for i in 0..m {
                let a = (u[i] - spacing[i]).max(lo[i]);
                let b = (u[i] + spacing[i]).min(hi[i]);
                if !(b > a) {
                    continue;
                }
                let mut probe = u.clone();
                let mut phi = |s: f64| -> Result<f64, ExprError> {
                    probe[i] = s;
                    h(&probe)
                };
                let s = golden_max(&mut phi, a, b, cfg.golden_iters)?;
                for cand in [s, a, b] {
                    let vc = phi(cand)?;
                    if vc > v {
                        v = vc;
                        u[i] = cand;
                    }
                }
            }
            Best::offer(&mut best, v, &u);
        }
        if let Some(step) = cfg.lattice_step {
            let counts: Vec<usize> =
                (0..m).map(|i| if hi[i] > lo[i] { (math::floor((hi[i] - lo[i]) / step + 1e-9) as usize) + 1 } else { 1 }).collect();
            let total = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(*c)).unwrap_or(usize::MAX);
            if total <= MAX_LATTICE {
                let mut idx = vec![0usize; m];
                let mut u = vec![0.0; m];
                loop {
                    for i in 0..m {
                        u[i] = (lo[i] + idx[i] as f64 * step).min(hi[i]);
                    }
                    Best::offer(&mut best, h(&u)?, &u);
                    let mut c = 0;
                    while c < m {
                        idx[c] += 1;
                        if idx[c] < counts[c] {
                            break;
                        }
                        idx[c] = 0;
                        c += 1;
                    }
                    if c == m {
                        break;
                    }
                }
            }
        }
    }
    Ok(best.map(|b| (b.value, b.u)).unwrap_or((f64::NEG_INFINITY, vec![0.0; p.m])))
}

fn in_box(u: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    u.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
}

fn golden_max(phi: &mut impl FnMut(f64) -> Result<f64, ExprError>, mut a: f64, mut b: f64, iters: usize) -> Result<f64, ExprError> {
    let r = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = phi(c)?;
    let mut fd = phi(d)?;
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = phi(d)?;
        }
    }
    Ok(if fc >= fd { c } else { d })
}

/// Node-supported measure for one state constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub constraint: usize,
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Measure {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierTuple {
    /// Signed `λ₀..λ_r`; the first `l+1` are nonnegative.
    pub lambdas: Vec<f64>,
    pub measures: Vec<Measure>,
    pub costate: Costate,
}

impl MultiplierTuple {
    /// `Σ|λⱼ| + Σ μᵢ([0,T])`, which is 1 for a normalized tuple.
    pub fn mass(&self) -> f64 {
        self.lambdas.iter().map(|v| v.abs()).sum::<f64>() + self.measures.iter().map(Measure::mass).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lambdas: math::scale(c, &self.lambdas),
            measures: self
                .measures
                .iter()
                .map(|m| Measure { constraint: m.constraint, nodes: m.nodes.clone(), weights: math::scale(c, &m.weights) })
                .collect(),
            costate: self.costate.scaled(c),
        }
    }

    /// Equality multipliers `λ_{l+1}..λ_r` as `(positive part, negative part)`.
    pub fn split_equalities(&self, l: usize) -> Vec<(f64, f64)> {
        self.lambdas.iter().skip(l + 1).map(|v| (v.max(0.0), (-v).max(0.0))).collect()
    }
}

/// `p(T+) = −Σ λⱼ ∂ℓⱼ/∂x(T)`.
pub fn terminal_costate(p: &ProblemSpec, base: &ControlProcess, lambdas: &[f64]) -> Result<Vec<f64>, FirstOrderError> {
    let mut out = vec![0.0; p.n];
    for (j, lam) in lambdas.iter().enumerate() {
        if *lam != 0.0 {
            let g = p.ell_grad(j, base.x0(), base.xt()).map_err(FirstOrderError::Endpoint)?;
            math::axpy(-lam, &g[p.n..], &mut out);
        }
    }
    Ok(out)
}

/// `Σ λⱼ ∂ℓⱼ/∂x(0)`, the transversality target for `p(0)`.
pub fn initial_costate(p: &ProblemSpec, base: &ControlProcess, lambdas: &[f64]) -> Result<Vec<f64>, FirstOrderError> {
    let mut out = vec![0.0; p.n];
    for (j, lam) in lambdas.iter().enumerate() {
        if *lam != 0.0 {
            let g = p.ell_grad(j, base.x0(), base.xt()).map_err(FirstOrderError::Endpoint)?;
            math::axpy(*lam, &g[..p.n], &mut out);
        }
    }
    Ok(out)
}

/// Jumps `γ μ` with `γ = g_ix(tₙ, x̄(tₙ))`.
pub fn measure_jumps(p: &ProblemSpec, base: &ControlProcess, measures: &[Measure]) -> Result<Vec<(usize, Vec<f64>)>, FirstOrderError> {
    let mut out = Vec::new();
    for m in measures {
        for (node, w) in m.nodes.iter().zip(&m.weights) {
            if *w == 0.0 {
                continue;
            }
            let gx = p
                .g_x(m.constraint, base.grid.t(*node), base.x.row(*node))
                .map_err(|source| FirstOrderError::Expr { interval: *node, source })?;
            out.push((*node, math::scale(*w, &gx)));
        }
    }
    Ok(out)
}

/// Backward costate for given multipliers.
pub fn integrate_adjoint(p: &ProblemSpec, base: &ControlProcess, lambdas: &[f64], measures: &[Measure]) -> Result<Costate, FirstOrderError> {
    let op = AdjointOperator::new(p, base)?;
    Ok(op.backward(&terminal_costate(p, base, lambdas)?, &measure_jumps(p, base, measures)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpTolerances {
    pub residual: f64,
    pub gap: f64,
    pub active: f64,
}

impl Default for MpTolerances {
    fn default() -> Self {
        Self { residual: 1e-8, gap: 1e-8, active: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpReport {
    /// Larger of `‖p(0) − Σλ ℓ_a‖` and `‖p(T+) + Σλ ℓ_b‖`.
    pub transversality: f64,
    /// Sup distance between the stored costate and the recomputed one.
    pub adjoint: f64,
    /// `sup (Ĥ − H)` over interval ends.
    pub hamiltonian_gap: f64,
    pub gap_node: usize,
    pub slackness: f64,
    /// Measure mass on nodes where the constraint is inactive.
    pub support: f64,
    /// Negative parts of `λ₀..λ_l` and of the measures.
    pub sign: f64,
    pub normalization: f64,
    /// `Σ|λ| + ‖p‖_∞ + Σμ`.
    pub nontriviality: f64,
    pub total_variation: f64,
    pub pass: bool,
}

pub fn mp_residuals(
    p: &ProblemSpec,
    base: &ControlProcess,
    mult: &MultiplierTuple,
    sampling: &SupConfig,
    tol: &MpTolerances,
) -> Result<MpReport, FirstOrderError> {
    if mult.lambdas.len() != p.r() + 1 {
        return Err(FirstOrderError::LambdaCount { got: mult.lambdas.len(), expected: p.r() + 1 });
    }
    let grid = &base.grid;
    let nn = grid.intervals();
    let cs = &mult.costate;
    let pt_plus = cs.right(nn);
    let target_t = terminal_costate(p, base, &mult.lambdas)?;
    let target_0 = initial_costate(p, base, &mult.lambdas)?;
    let transversality = math::dist(cs.left(0), &target_0).max(math::dist(&pt_plus, &target_t));

    let recomputed = integrate_adjoint(p, base, &mult.lambdas, &mult.measures)?;
    let mut adjoint: f64 = 0.0;
    for k in 0..=nn {
        adjoint = adjoint.max(math::norm_inf(&math::sub(cs.left(k), recomputed.left(k))));
        adjoint = adjoint.max(math::norm_inf(&math::sub(&cs.right(k), &recomputed.right(k))));
    }

    let mut gap: f64 = 0.0;
    let mut gap_node = 0;
    for k in 0..nn {
        let region = p.control_set.on_interval(grid.t(k), grid.t(k + 1));
        let u = base.u.row(k);
        let ends = [(k, cs.right(k)), (k + 1, cs.left(k + 1).to_vec())];
        for (node, pv) in ends {
            let (t, x) = (grid.t(node), base.x.row(node));
            let hv = hamiltonian(p, t, x, &pv, u).map_err(|source| FirstOrderError::Expr { interval: k, source })?;
            let (hs, _) = hamiltonian_sup(p, t, x, &pv, region, sampling).map_err(|source| FirstOrderError::Expr { interval: k, source })?;
            let g = (hs - hv).max(0.0);
            if g > gap {
                gap = g;
                gap_node = node;
            }
        }
    }

    let ell = p.ell(base.x0(), base.xt()).map_err(FirstOrderError::Endpoint)?;
    let slackness: f64 = (1..=p.l).map(|j| (mult.lambdas[j] * ell[j]).abs()).sum();
    let mut gmax: f64 = 0.0;
    let mut gvals = Vec::with_capacity(nn + 1);
    for k in 0..=nn {
        let g = p.g(grid.t(k), base.x.row(k)).map_err(|source| FirstOrderError::Expr { interval: k, source })?;
        gmax = gmax.max(math::norm_inf(&g));
        gvals.push(g);
    }
    let active_tol = tol.active * (1.0 + gmax);
    let mut support = 0.0;
    let mut sign: f64 = (0..=p.l).map(|j| (-mult.lambdas[j]).max(0.0)).sum();
    for m in &mult.measures {
        for (node, w) in m.nodes.iter().zip(&m.weights) {
            sign += (-w).max(0.0);
            if gvals[*node][m.constraint] < -active_tol {
                support += w.abs();
            }
        }
    }
    let mass = mult.mass();
    let nontriviality = mass + cs.sup_norm();
    let pass = transversality <= tol.residual
        && adjoint <= tol.residual
        && gap <= tol.gap
        && slackness <= tol.residual
        && support <= tol.residual
        && sign <= tol.residual
        && nontriviality > tol.residual;
    Ok(MpReport {
        transversality,
        adjoint,
        hamiltonian_gap: gap,
        gap_node,
        slackness,
        support,
        sign,
        normalization: (mass - 1.0).abs(),
        nontriviality,
        total_variation: cs.total_variation(),
        pass,
    })
}

/// The zero tuple for `p`: every multiplier and the costate vanish.
pub fn zero_tuple(p: &ProblemSpec, base: &ControlProcess) -> MultiplierTuple {
    MultiplierTuple {
        lambdas: vec![0.0; p.r() + 1],
        measures: Vec::new(),
        costate: Costate { values: Samples::zeros(base.grid.intervals() + 1, p.n), atoms: Vec::new() },
    }
}

//! Grid-sampled control processes and the operations on them: fixed-step RK4,
//! relaxed dynamics, chattering controls, the linearized (variational)
//! equation, L¹ residuals and a Gronwall-type regularity bound.
//!
//! Conventions: `x` is piecewise linear between nodes, `u` is constant on each
//! left-closed interval `[t_k, t_{k+1})`.

use alloc::vec::Vec;

use crate::grid::{Grid, Samples};
use crate::math;
use crate::model::expr::ExprError;
use crate::model::problem::ProblemSpec;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("expression failed on interval {interval}: {source}")]
    Expr { interval: usize, source: ExprError },
    #[error("state is not finite after interval {interval}")]
    BlowUp { interval: usize },
    #[error("expected {expected} rows of dimension {dim}, got {got_rows} of dimension {got_dim}")]
    Shape { expected: usize, dim: usize, got_rows: usize, got_dim: usize },
    #[error("chattering switch point t = {t} is not a grid node")]
    GridTooCoarse { t: f64 },
    #[error("chattering weights must be nonnegative with sum below 1")]
    BadWeights,
    #[error("chattering needs s ≥ 1")]
    NoSwitching,
    #[error("regularity hypothesis fails: (1 + ∫k)·residual = {lhs} is not below ε₀ = {eps0}")]
    HypothesisViolated { lhs: f64, eps0: f64 },
}

fn at(interval: usize) -> impl Fn(ExprError) -> TrajectoryError {
    move |source| TrajectoryError::Expr { interval, source }
}

fn check_shape(s: &Samples, rows: usize, dim: usize) -> Result<(), TrajectoryError> {
    if s.len() != rows || s.dim() != dim {
        return Err(TrajectoryError::Shape { expected: rows, dim, got_rows: s.len(), got_dim: s.dim() });
    }
    Ok(())
}

/// A pair `(x(·), u(·))` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProcess {
    pub grid: Grid,
    /// Node states, `N+1` rows.
    pub x: Samples,
    /// Interval controls, `N` rows.
    pub u: Samples,
}

impl ControlProcess {
    pub fn new(grid: Grid, x: Samples, u: Samples) -> Result<Self, TrajectoryError> {
        let n = grid.intervals();
        check_shape(&x, n + 1, x.dim())?;
        check_shape(&u, n, u.dim())?;
        Ok(Self { grid, x, u })
    }

    pub fn n(&self) -> usize {
        self.x.dim()
    }

    pub fn m(&self) -> usize {
        self.u.dim()
    }

    pub fn x0(&self) -> &[f64] {
        self.x.row(0)
    }

    pub fn xt(&self) -> &[f64] {
        self.x.row(self.x.len() - 1)
    }

    pub fn x_at(&self, t: f64) -> Vec<f64> {
        let k = self.grid.interval_of(t);
        let theta = (t - self.grid.t(k)) / self.grid.step(k);
        self.x.lerp(k, theta)
    }

    /// Slope of `x` on interval `k`.
    pub fn slope(&self, k: usize) -> Vec<f64> {
        let h = self.grid.step(k);
        self.x.row(k + 1).iter().zip(self.x.row(k)).map(|(b, a)| (b - a) / h).collect()
    }

    /// First interval whose control lies outside `U(t)` by more than `tol`.
    pub fn first_infeasible_control(&self, p: &ProblemSpec, tol: f64) -> Option<usize> {
        (0..self.grid.intervals()).find(|&k| {
            let r = p.control_set.on_interval(self.grid.t(k), self.grid.t(k + 1));
            !r.contains(self.u.row(k), tol)
        })
    }

    /// The reference process of the time-reparameterized problem: `t̄(τ) = Tτ`,
    /// `ȳ(τ) = x̄(Tτ)`, `v̄ ≡ T`.
    pub fn time_reparam(&self) -> ControlProcess {
        let big_t = self.grid.horizon();
        let nodes: Vec<f64> = self.grid.nodes().iter().map(|t| t / big_t).collect();
        let mut nodes = nodes;
        let last = nodes.len() - 1;
        nodes[last] = 1.0;
        let grid = Grid::from_nodes(nodes).expect("scaled grid stays increasing");
        let x = Samples::from_fn(self.x.len(), self.n() + 1, |k| {
            let mut r = self.x.row(k).to_vec();
            r.push(self.grid.t(k));
            r
        });
        let u = Samples::constant(self.grid.intervals(), &[big_t]);
        ControlProcess { grid, x, u }
    }
}

fn rk4_step(
    mut rhs: impl FnMut(f64, &[f64]) -> Result<Vec<f64>, ExprError>,
    t: f64,
    h: f64,
    x: &[f64],
) -> Result<Vec<f64>, ExprError> {
    let k1 = rhs(t, x)?;
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = rhs(t + 0.5 * h, &x2)?;
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = rhs(t + 0.5 * h, &x3)?;
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = rhs(t + h, &x4)?;
    Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

fn integrate_with(
    grid: &Grid,
    x0: &[f64],
    mut rhs: impl FnMut(usize, f64, &[f64]) -> Result<Vec<f64>, ExprError>,
) -> Result<Samples, TrajectoryError> {
    let n = x0.len();
    let mut xs = Samples::zeros(grid.intervals() + 1, n);
    xs.row_mut(0).copy_from_slice(x0);
    let mut x = x0.to_vec();
    for k in 0..grid.intervals() {
        x = rk4_step(|t, y| rhs(k, t, y), grid.t(k), grid.step(k), &x).map_err(at(k))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TrajectoryError::BlowUp { interval: k });
        }
        xs.row_mut(k + 1).copy_from_slice(&x);
    }
    Ok(xs)
}

/// Classical RK4 with the control frozen on each grid interval.
pub fn integrate_forward(p: &ProblemSpec, x0: &[f64], u: &Samples, grid: &Grid) -> Result<ControlProcess, TrajectoryError> {
    check_shape(u, grid.intervals(), p.m)?;
    if x0.len() != p.n {
        return Err(TrajectoryError::Shape { expected: 1, dim: p.n, got_rows: 1, got_dim: x0.len() });
    }
    let x = integrate_with(grid, x0, |k, t, y| p.f(t, y, u.row(k)))?;
    Ok(ControlProcess { grid: grid.clone(), x, u: u.clone() })
}

/// `f(t,x,u) + Σ αᵢ (f(t,x,uᵢ) − f(t,x,u))`.
pub fn relaxed_rhs(p: &ProblemSpec, t: f64, x: &[f64], u: &[f64], u_refs: &[&[f64]], alphas: &[f64]) -> Result<Vec<f64>, ExprError> {
    let base = p.f(t, x, u)?;
    let mut out = base.clone();
    for (ui, a) in u_refs.iter().zip(alphas) {
        if *a == 0.0 {
            continue;
        }
        let fi = p.f(t, x, ui)?;
        for j in 0..out.len() {
            out[j] += a * (fi[j] - base[j]);
        }
    }
    Ok(out)
}

/// Solution of the relaxed equation with interval-constant `u`, `uᵢ` and fixed weights.
pub fn integrate_relaxed(
    p: &ProblemSpec,
    x0: &[f64],
    u: &Samples,
    u_refs: &[Samples],
    alphas: &[f64],
    grid: &Grid,
) -> Result<ControlProcess, TrajectoryError> {
    check_shape(u, grid.intervals(), p.m)?;
    for r in u_refs {
        check_shape(r, grid.intervals(), p.m)?;
    }
    let x = integrate_with(grid, x0, |k, t, y| {
        let refs: Vec<&[f64]> = u_refs.iter().map(|r| r.row(k)).collect();
        relaxed_rhs(p, t, y, u.row(k), &refs, alphas)
    })?;
    Ok(ControlProcess { grid: grid.clone(), x, u: u.clone() })
}

/// Chattering control: `[0,T]` is cut into `s` equal pieces; in each piece the
/// control equals `uᵢ` on consecutive sub-intervals of length `αᵢT/s`, packed
/// from the left in index order, and `u` on the remainder.
pub fn chattering_control(u: &Samples, u_refs: &[Samples], alphas: &[f64], s: usize, grid: &Grid) -> Result<Samples, TrajectoryError> {
    if s == 0 {
        return Err(TrajectoryError::NoSwitching);
    }
    let total: f64 = alphas.iter().sum();
    if alphas.len() != u_refs.len() || alphas.iter().any(|a| !(*a >= 0.0)) || !(total < 1.0) {
        return Err(TrajectoryError::BadWeights);
    }
    check_shape(u, grid.intervals(), u.dim())?;
    for r in u_refs {
        check_shape(r, grid.intervals(), u.dim())?;
    }
    let big_t = grid.horizon();
    let piece = big_t / s as f64;
    let tol = 1e-9 * grid.step(0).min(piece);
    // Cumulative offsets of the switch points inside one piece.
    let mut offsets = Vec::with_capacity(alphas.len() + 1);
    let mut acc = 0.0;
    offsets.push(0.0);
    for a in alphas {
        acc += a * piece;
        offsets.push(acc);
    }
    for j in 0..s {
        for off in &offsets {
            let t = j as f64 * piece + off;
            if grid.node_at(t, tol).is_none() {
                return Err(TrajectoryError::GridTooCoarse { t });
            }
        }
    }
    Ok(Samples::from_fn(grid.intervals(), u.dim(), |k| {
        let mid = grid.midpoint(k);
        let j = math::floor(mid / piece).min((s - 1) as f64) as usize;
        let local = mid - j as f64 * piece;
        match (0..alphas.len()).find(|&i| local >= offsets[i] && local < offsets[i + 1]) {
            Some(i) => u_refs[i].row(k).to_vec(),
            None => u.row(k).to_vec(),
        }
    }))
}

/// Solution of `ḣ = f_x h + f_u u + β (f(t,x̄,w) − f(t,x̄,ū))`, `h(0) = h0`, along `base`.
pub fn integrate_variational(
    p: &ProblemSpec,
    base: &ControlProcess,
    h0: &[f64],
    u: &Samples,
    beta: f64,
    w: &Samples,
) -> Result<Samples, TrajectoryError> {
    let grid = &base.grid;
    check_shape(u, grid.intervals(), p.m)?;
    check_shape(w, grid.intervals(), p.m)?;
    integrate_with(grid, h0, |k, t, h| {
        let theta = ((t - grid.t(k)) / grid.step(k)).clamp(0.0, 1.0);
        let xb = base.x.lerp(k, theta);
        let ub = base.u.row(k);
        let mut d = p.f_dir(t, &xb, ub, h, u.row(k))?;
        if beta != 0.0 {
            let fw = p.f(t, &xb, w.row(k))?;
            let fb = p.f(t, &xb, ub)?;
            for i in 0..d.len() {
                d[i] += beta * (fw[i] - fb[i]);
            }
        }
        Ok(d)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `∫‖ẋ − f(t,x,u)‖dt` by the trapezoid rule with `ẋ` the interval slope.
    pub l1_residual: f64,
    pub sup_residual: f64,
    pub per_interval: Vec<f64>,
}

pub fn residual(p: &ProblemSpec, proc: &ControlProcess) -> Result<ResidualReport, TrajectoryError> {
    let grid = &proc.grid;
    let mut per_interval = Vec::with_capacity(grid.intervals());
    let mut sup: f64 = 0.0;
    for k in 0..grid.intervals() {
        let s = proc.slope(k);
        let u = proc.u.row(k);
        let a = math::dist(&s, &p.f(grid.t(k), proc.x.row(k), u).map_err(at(k))?);
        let b = math::dist(&s, &p.f(grid.t(k + 1), proc.x.row(k + 1), u).map_err(at(k))?);
        sup = sup.max(a).max(b);
        per_interval.push(0.5 * grid.step(k) * (a + b));
    }
    Ok(ResidualReport { l1_residual: per_interval.iter().sum(), sup_residual: sup, per_interval })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub residual: f64,
    /// Estimate of `∫k(t)dt` for the Lipschitz modulus `k` over the tube.
    pub lipschitz_integral: f64,
    /// `K = (1 + ∫k)·exp(∫k)`.
    pub constant: f64,
    pub bound: f64,
    /// `W^{1,1}` distance to the solution integrated from `x(0)` with the same control.
    pub realized_distance: f64,
    pub holds: bool,
}

/// Relative slack granted to `realized ≤ bound` for cases where both sides
/// coincide in exact arithmetic. Slopes are node differences, so rounding is
/// also absolute at `ε·Σ‖xₖ‖`; that term is added on top.
pub const BOUND_SLACK: f64 = 1e-12;

pub fn regularity_check(p: &ProblemSpec, proc: &ControlProcess, eps0: f64, rng: &mut SeededRng) -> Result<RegularityReport, TrajectoryError> {
    let grid = &proc.grid;
    let res = residual(p, proc)?.l1_residual;
    let n = p.n;
    let mut kint = 0.0;
    for k in 0..grid.intervals() {
        let u = proc.u.row(k);
        let mut kk: f64 = 0.0;
        for _ in 0..8 {
            let theta = rng.uniform();
            let t = grid.t(k) + theta * grid.step(k);
            let centre = proc.x.lerp(k, theta);
            let a = math::add(&centre, &rng.in_ball(n, eps0));
            let b = math::add(&centre, &rng.in_ball(n, eps0));
            let d = math::dist(&a, &b);
            if d > 0.0 {
                let fa = p.f(t, &a, u).map_err(at(k))?;
                let fb = p.f(t, &b, u).map_err(at(k))?;
                kk = kk.max(math::dist(&fa, &fb) / d);
            }
            // Pairwise quotients see only one direction; the Jacobian norm covers the rest.
            let (fx, _) = p.f_jac(t, &a, u).map_err(at(k))?;
            kk = kk.max(fx.op_norm());
        }
        kint += 1.5 * kk * grid.step(k);
    }
    let lhs = (1.0 + kint) * res;
    if !(lhs < eps0) && res > 0.0 {
        return Err(TrajectoryError::HypothesisViolated { lhs, eps0 });
    }
    let constant = (1.0 + kint) * math::exp(kint);
    let bound = constant * res;
    let y = integrate_forward(p, proc.x0(), &proc.u, grid)?;
    let mut realized = 0.0;
    let mut magnitude = 0.0;
    for k in 0..grid.intervals() {
        realized += grid.step(k) * math::dist(&proc.slope(k), &y.slope(k));
        magnitude += math::norm(proc.x.row(k)) + math::norm(proc.x.row(k + 1)) + math::norm(y.x.row(k)) + math::norm(y.x.row(k + 1));
    }
    let slack = bound * BOUND_SLACK + 8.0 * f64::EPSILON * magnitude;
    let holds = realized <= bound + slack + f64::MIN_POSITIVE;
    Ok(RegularityReport { residual: res, lipschitz_integral: kint, constant, bound, realized_distance: realized, holds })
}

/// `x + δ` with `δᵢ(t) = aᵢ sin(ω t/T + φᵢ)`, `ω ∈ [0, π/2]`, scaled so that
/// `sup_t ‖δ(t)‖ ≤ amplitude`.
pub fn perturb_process(proc: &ControlProcess, amplitude: f64, rng: &mut SeededRng) -> ControlProcess {
    let n = proc.n();
    let big_t = proc.grid.horizon();
    let omega = rng.range(0.0, core::f64::consts::FRAC_PI_2);
    let scale = amplitude * rng.uniform() / math::sqrt(n as f64);
    let coeffs: Vec<(f64, f64)> = (0..n).map(|_| (rng.range(-1.0, 1.0) * scale, rng.range(0.0, 2.0 * core::f64::consts::PI))).collect();
    let x = Samples::from_fn(proc.x.len(), n, |k| {
        let t = proc.grid.t(k);
        proc.x.row(k).iter().zip(&coeffs).map(|(xi, (a, phi))| xi + a * math::sin(omega * t / big_t + phi)).collect()
    });
    ControlProcess { grid: proc.grid.clone(), x, u: proc.u.clone() }
}

/// Sup over nodes of `‖a(t) − b(t)‖`.
pub fn sup_distance(a: &Samples, b: &Samples) -> f64 {
    a.rows().zip(b.rows()).fold(0.0, |m, (x, y)| m.max(math::dist(x, y)))
}

/// Constant samples helper.
pub fn constant_control(grid: &Grid, value: &[f64]) -> Samples {
    Samples::constant(grid.intervals(), value)
}

/// Control equal to `value` on `[0, until)` and `rest` elsewhere.
pub fn step_control(grid: &Grid, value: &[f64], until: f64, rest: &[f64]) -> Samples {
    Samples::from_fn(grid.intervals(), value.len(), |k| {
        if grid.midpoint(k) < until {
            value.to_vec()
        } else {
            rest.to_vec()
        }
    })
}

//! Unconstrained penalized functionals that replace the constrained problem,
//! their smoothed minimization and the nonsingular/singular alternative driver.
//!
//! For a decision `z = (x, u, α)` on a grid:
//!
//! ```text
//! ψ(x)   = max{ ℓ₀(x(0),x(T)) − ℓ₀(x̄(0),x̄(T)), maxᵢ maxₙ gᵢ(tₙ, xₙ) }
//! d(x)   = ( Σ_{j≤l} max(ℓⱼ,0)² + Σ_{j>l} ℓⱼ² )^{1/2}
//! J_k(z) = ∫ ‖ẋ − f(t,x,u) − Σ αᵢ (f(t,x,uᵢ) − f(t,x,u))‖ dt
//! 𝒥      = λψ + d + J_k                                 (nonsingular mode)
//! 𝒥ₘ     = λψₘ + d + J_k + m⁻¹( ‖x − x̄ₘ‖_C + ∫‖u − ūₘ‖ + Σ αᵢ∫‖uᵢ − ūₘ‖ )
//! ```
//!
//! with `ψₘ` the same as `ψ` but with the cost gap shifted by `m⁻²`.

mod drive;
mod lbfgs;

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, Samples};
use crate::math;
use crate::model::control_set::Region;
use crate::model::expr::ExprError;
use crate::model::problem::ProblemSpec;
use crate::trajectory::{ControlProcess, TrajectoryError};

pub use drive::{optimality_alternative_drive, AlternativeConfig, AlternativeOutcome, EkelandStep};
pub use lbfgs::{LbfgsConfig, LbfgsResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PenaltyError {
    #[error("expression failed: {0}")]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("smoothing stage ε = {eps} ended above its start ({start} → {end})")]
    StageIncrease { eps: f64, start: f64, end: f64 },
    #[error("penalized value is not finite at smoothing stage ε = {eps}")]
    NotFinite { eps: f64 },
    #[error("decision vector shape does not match the functional")]
    Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub x: Samples,
    pub u: Samples,
    pub alphas: Vec<f64>,
}

impl DecisionVector {
    pub fn from_process(proc: &ControlProcess, k: usize) -> Self {
        Self { x: proc.x.clone(), u: proc.u.clone(), alphas: vec![0.0; k] }
    }

    pub fn to_process(&self, grid: &Grid) -> ControlProcess {
        ControlProcess { grid: grid.clone(), x: self.x.clone(), u: self.u.clone() }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.x.as_slice().len() + self.u.as_slice().len() + self.alphas.len());
        z.extend_from_slice(self.x.as_slice());
        z.extend_from_slice(self.u.as_slice());
        z.extend_from_slice(&self.alphas);
        z
    }

    fn unflatten(&mut self, z: &[f64]) {
        let nx = self.x.as_slice().len();
        let nu = self.u.as_slice().len();
        self.x.as_mut_slice().copy_from_slice(&z[..nx]);
        self.u.as_mut_slice().copy_from_slice(&z[nx..nx + nu]);
        self.alphas.copy_from_slice(&z[nx + nu..]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Nonsingular { lambda: f64 },
    Ekeland { lambda: f64, m: f64, anchor: DecisionVector },
}

impl Mode {
    pub fn lambda(&self) -> f64 {
        match self {
            Mode::Nonsingular { lambda } | Mode::Ekeland { lambda, .. } => *lambda,
        }
    }
}

/// Neighbourhood `‖x − x̄‖∞ ≤ x_radius`, `‖u − ū‖∞ ≤ u_radius` around a centre process.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub center: ControlProcess,
    pub x_radius: f64,
    pub u_radius: f64,
}

#[derive(Debug, Clone)]
pub struct PenaltyFunctional<'a> {
    pub problem: &'a ProblemSpec,
    pub grid: Grid,
    /// Comparison controls `u₁..u_k`, one sample row per interval.
    pub u_refs: Vec<Samples>,
    /// `ℓ₀(x̄(0), x̄(T))`.
    pub reference_cost: f64,
    pub mode: Mode,
    pub tube: Option<Tube>,
}

/// `ψ` over grid nodes, with an additive shift on the cost gap.
pub fn psi(p: &ProblemSpec, x: &Samples, grid: &Grid, reference_cost: f64, shift: f64) -> Result<f64, ExprError> {
    let ell = p.ell(x.row(0), x.row(x.len() - 1))?;
    let mut v = ell[0] - reference_cost + shift;
    for k in 0..x.len() {
        for g in p.g(grid.t(k), x.row(k))? {
            v = v.max(g);
        }
    }
    Ok(v)
}

/// Euclidean distance of the endpoint constraint values to the admissible set.
pub fn endpoint_distance(p: &ProblemSpec, x0: &[f64], xt: &[f64]) -> Result<f64, ExprError> {
    let ell = p.ell(x0, xt)?;
    Ok(math::sqrt(endpoint_sq(p, &ell)))
}

fn endpoint_sq(p: &ProblemSpec, ell: &[f64]) -> f64 {
    ell.iter()
        .enumerate()
        .skip(1)
        .map(|(j, v)| if j <= p.l { v.max(0.0) * v.max(0.0) } else { v * v })
        .sum()
}

fn relaxed_at(p: &ProblemSpec, t: f64, x: &[f64], u: &[f64], refs: &[&[f64]], alphas: &[f64]) -> Result<Vec<f64>, ExprError> {
    crate::trajectory::relaxed_rhs(p, t, x, u, refs, alphas)
}

/// `J_k` by the midpoint rule with `ẋ` the interval slope.
pub fn j_k(p: &ProblemSpec, grid: &Grid, z: &DecisionVector, u_refs: &[Samples]) -> Result<f64, ExprError> {
    let mut total = 0.0;
    for k in 0..grid.intervals() {
        let h = grid.step(k);
        let xm = z.x.lerp(k, 0.5);
        let refs: Vec<&[f64]> = u_refs.iter().map(|r| r.row(k)).collect();
        let f = relaxed_at(p, grid.midpoint(k), &xm, z.u.row(k), &refs, &z.alphas)?;
        let r: Vec<f64> = (0..p.n).map(|i| (z.x.row(k + 1)[i] - z.x.row(k)[i]) / h - f[i]).collect();
        total += h * math::norm(&r);
    }
    Ok(total)
}

/// `sqrt(|v|² + ε²) − ε` and its gradient factor `1/sqrt(|v|² + ε²)`.
fn smooth_norm(v: &[f64], eps: f64) -> (f64, f64) {
    let s = math::sqrt(math::dot(v, v) + eps * eps);
    if s == 0.0 {
        (0.0, 0.0)
    } else {
        (s - eps, 1.0 / s)
    }
}

/// Softmax `ε log Σ exp(vᵢ/ε)` and its weights; the exact max when `ε = 0`.
fn smooth_max(v: &[f64], eps: f64) -> (f64, Vec<f64>) {
    let mut idx = 0;
    for i in 1..v.len() {
        if v[i] > v[idx] {
            idx = i;
        }
    }
    let top = v[idx];
    if eps == 0.0 {
        let mut w = vec![0.0; v.len()];
        w[idx] = 1.0;
        return (top, w);
    }
    let e: Vec<f64> = v.iter().map(|x| math::exp((x - top) / eps)).collect();
    let s: f64 = e.iter().sum();
    (top + eps * math::ln(s), e.iter().map(|x| x / s).collect())
}

impl<'a> PenaltyFunctional<'a> {
    pub fn nonsingular(problem: &'a ProblemSpec, grid: Grid, reference_cost: f64, lambda: f64) -> Self {
        Self { problem, grid, u_refs: Vec::new(), reference_cost, mode: Mode::Nonsingular { lambda }, tube: None }
    }

    fn check(&self, z: &DecisionVector) -> Result<(), PenaltyError> {
        let n = self.grid.intervals();
        if z.x.len() != n + 1 || z.x.dim() != self.problem.n || z.u.len() != n || z.u.dim() != self.problem.m || z.alphas.len() != self.u_refs.len() {
            return Err(PenaltyError::Shape);
        }
        Ok(())
    }

    /// Exact (unsmoothed) value.
    pub fn value(&self, z: &DecisionVector) -> Result<f64, PenaltyError> {
        self.check(z)?;
        Ok(self.evaluate(z, 0.0, false)?.0)
    }

    /// Value with the components `(λψ, d, J_k, Ekeland term)`.
    pub fn components(&self, z: &DecisionVector) -> Result<[f64; 4], PenaltyError> {
        self.check(z)?;
        let p = self.problem;
        let lambda = self.mode.lambda();
        let shift = match &self.mode {
            Mode::Ekeland { m, .. } => 1.0 / (m * m),
            _ => 0.0,
        };
        let lpsi = if lambda == 0.0 { 0.0 } else { lambda * psi(p, &z.x, &self.grid, self.reference_cost, shift)? };
        let d = endpoint_distance(p, z.x.row(0), z.x.row(z.x.len() - 1))?;
        let j = j_k(p, &self.grid, z, &self.u_refs)?;
        let total = self.value(z)?;
        Ok([lpsi, d, j, total - lpsi - d - j])
    }

    /// Smoothed value and gradient over the flattened decision vector.
    pub fn smoothed(&self, z: &DecisionVector, eps: f64) -> Result<(f64, Vec<f64>), PenaltyError> {
        self.check(z)?;
        self.evaluate(z, eps, true)
    }

    fn evaluate(&self, z: &DecisionVector, eps: f64, want_grad: bool) -> Result<(f64, Vec<f64>), PenaltyError> {
        let p = self.problem;
        let grid = &self.grid;
        let (n, m) = (p.n, p.m);
        let nn = grid.intervals();
        let nx = (nn + 1) * n;
        let nu = nn * m;
        let kref = self.u_refs.len();
        let mut grad = if want_grad { vec![0.0; nx + nu + kref] } else { Vec::new() };
        let x0 = z.x.row(0);
        let xt = z.x.row(nn);
        let mut value = 0.0;

        // λψ
        let lambda = self.mode.lambda();
        if lambda != 0.0 {
            let shift = match &self.mode {
                Mode::Ekeland { m, .. } => 1.0 / (m * m),
                _ => 0.0,
            };
            let ell0 = p.endpoint[0].eval(0.0, &[x0, xt].concat(), &[])?;
            let mut vals = vec![ell0 - self.reference_cost + shift];
            for k in 0..=nn {
                vals.extend(p.g(grid.t(k), z.x.row(k))?);
            }
            let (v, w) = smooth_max(&vals, eps);
            value += lambda * v;
            if want_grad {
                if w[0] != 0.0 {
                    let g = p.ell_grad(0, x0, xt)?;
                    for i in 0..n {
                        grad[i] += lambda * w[0] * g[i];
                        grad[nn * n + i] += lambda * w[0] * g[n + i];
                    }
                }
                let s = p.s();
                for k in 0..=nn {
                    for ci in 0..s {
                        let wi = w[1 + k * s + ci];
                        if wi > 1e-300 {
                            let g = p.g_x(ci, grid.t(k), z.x.row(k))?;
                            math::axpy(lambda * wi, &g, &mut grad[k * n..(k + 1) * n]);
                        }
                    }
                }
            }
        }

        // d
        if p.r() > 0 {
            let ell = p.ell(x0, xt)?;
            let (v, fac) = smooth_norm_sq(endpoint_sq(p, &ell), eps);
            value += v;
            if want_grad && fac != 0.0 {
                for j in 1..=p.r() {
                    let c = if j <= p.l { ell[j].max(0.0) } else { ell[j] };
                    if c != 0.0 {
                        let g = p.ell_grad(j, x0, xt)?;
                        for i in 0..n {
                            grad[i] += fac * c * g[i];
                            grad[nn * n + i] += fac * c * g[n + i];
                        }
                    }
                }
            }
        }

        // J_k
        let asum: f64 = z.alphas.iter().sum();
        for k in 0..nn {
            let h = grid.step(k);
            let tm = grid.midpoint(k);
            let xm = z.x.lerp(k, 0.5);
            let uk = z.u.row(k);
            let refs: Vec<&[f64]> = self.u_refs.iter().map(|r| r.row(k)).collect();
            let fu = p.f(tm, &xm, uk)?;
            let fr: Vec<Vec<f64>> = refs.iter().map(|r| p.f(tm, &xm, r)).collect::<Result<_, _>>()?;
            let mut r: Vec<f64> = (0..n).map(|i| (z.x.row(k + 1)[i] - z.x.row(k)[i]) / h - fu[i]).collect();
            for (a, fi) in z.alphas.iter().zip(&fr) {
                for i in 0..n {
                    r[i] -= a * (fi[i] - fu[i]);
                }
            }
            let (v, fac) = if eps == 0.0 {
                let nr = math::norm(&r);
                (nr, if nr > 0.0 { 1.0 / nr } else { 0.0 })
            } else {
                smooth_norm(&r, eps)
            };
            value += h * v;
            if !want_grad || fac == 0.0 {
                continue;
            }
            // ŵ = h · r / |r|_ε ; contributions (∂r/∂·)ᵀ ŵ
            let wv: Vec<f64> = r.iter().map(|ri| h * fac * ri).collect();
            for i in 0..n {
                grad[k * n + i] -= wv[i] / h;
                grad[(k + 1) * n + i] += wv[i] / h;
            }
            // −F_xᵀ ŵ / 2 to each endpoint node, −(1−Σα) f_uᵀ ŵ to u_k
            let mut fxw = vec![0.0; n];
            let mut fuw = vec![0.0; m];
            for (i, e) in p.dynamics.iter().enumerate() {
                if wv[i] == 0.0 {
                    continue;
                }
                let (gx, gu) = e.grad(tm, &xm, uk)?;
                math::axpy((1.0 - asum) * wv[i], &gx, &mut fxw);
                math::axpy((1.0 - asum) * wv[i], &gu, &mut fuw);
                for (a, rr) in z.alphas.iter().zip(&refs) {
                    if *a != 0.0 {
                        let (gxr, _) = e.grad(tm, &xm, rr)?;
                        math::axpy(a * wv[i], &gxr, &mut fxw);
                    }
                }
            }
            for i in 0..n {
                grad[k * n + i] -= 0.5 * fxw[i];
                grad[(k + 1) * n + i] -= 0.5 * fxw[i];
            }
            for j in 0..m {
                grad[nx + k * m + j] -= fuw[j];
            }
            for (ai, fi) in fr.iter().enumerate() {
                let dot: f64 = (0..n).map(|i| (fi[i] - fu[i]) * wv[i]).sum();
                grad[nx + nu + ai] -= dot;
            }
        }

        // Ekeland distance terms
        if let Mode::Ekeland { m: mm, anchor, .. } = &self.mode {
            let inv = 1.0 / mm;
            let mut norms = Vec::with_capacity(nn + 1);
            let mut facs = Vec::with_capacity(nn + 1);
            let mut diffs = Vec::with_capacity(nn + 1);
            for k in 0..=nn {
                let dlt = math::sub(z.x.row(k), anchor.x.row(k));
                let (v, fac) = if eps == 0.0 {
                    let nr = math::norm(&dlt);
                    (nr, if nr > 0.0 { 1.0 / nr } else { 0.0 })
                } else {
                    smooth_norm(&dlt, eps)
                };
                norms.push(v);
                facs.push(fac);
                diffs.push(dlt);
            }
            let (cmax, w) = smooth_max(&norms, eps);
            value += inv * cmax;
            if want_grad {
                for k in 0..=nn {
                    if w[k] != 0.0 {
                        math::axpy(inv * w[k] * facs[k], &diffs[k], &mut grad[k * n..(k + 1) * n]);
                    }
                }
            }
            for k in 0..nn {
                let h = grid.step(k);
                let dlt = math::sub(z.u.row(k), anchor.u.row(k));
                let (v, fac) = if eps == 0.0 {
                    let nr = math::norm(&dlt);
                    (nr, if nr > 0.0 { 1.0 / nr } else { 0.0 })
                } else {
                    smooth_norm(&dlt, eps)
                };
                value += inv * h * v;
                if want_grad {
                    math::axpy(inv * h * fac, &dlt, &mut grad[nx + k * m..nx + (k + 1) * m]);
                }
                for (ai, r) in self.u_refs.iter().enumerate() {
                    let dist = math::dist(r.row(k), anchor.u.row(k));
                    value += inv * h * z.alphas[ai] * dist;
                    if want_grad {
                        grad[nx + nu + ai] += inv * h * dist;
                    }
                }
            }
        }
        Ok((value, grad))
    }

    /// Per-coordinate bounds of the feasible box (tube ∩ U for controls) and a
    /// flag telling whether each control row may move at all.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.problem;
        let grid = &self.grid;
        let nn = grid.intervals();
        let (n, m) = (p.n, p.m);
        let mut lo = vec![f64::NEG_INFINITY; (nn + 1) * n + nn * m + self.u_refs.len()];
        let mut hi = vec![f64::INFINITY; lo.len()];
        if let Some(tube) = &self.tube {
            for k in 0..=nn {
                for i in 0..n {
                    let c = tube.center.x.row(k)[i];
                    lo[k * n + i] = c - tube.x_radius;
                    hi[k * n + i] = c + tube.x_radius;
                }
            }
        }
        let nx = (nn + 1) * n;
        for k in 0..nn {
            let region = p.control_set.on_interval(grid.t(k), grid.t(k + 1));
            for j in 0..m {
                let idx = nx + k * m + j;
                match region {
                    Region::Finite(_) => {
                        // Finite sets are not searched by descent; the control stays put.
                        lo[idx] = f64::NAN;
                        hi[idx] = f64::NAN;
                    }
                    _ => {
                        let b = region.box_part().expect("box branch present");
                        lo[idx] = b.lo[j];
                        hi[idx] = b.hi[j];
                    }
                }
                if let Some(tube) = &self.tube {
                    let c = tube.center.u.row(k)[j];
                    if !lo[idx].is_nan() {
                        lo[idx] = lo[idx].max(c - tube.u_radius);
                        hi[idx] = hi[idx].min(c + tube.u_radius);
                        if lo[idx] > hi[idx] {
                            // centre outside U: pin to the nearest admissible value
                            let v = c.clamp(b_lo(region, j), b_hi(region, j));
                            lo[idx] = v;
                            hi[idx] = v;
                        }
                    }
                }
            }
        }
        let a0 = nx + nn * m;
        for a in 0..self.u_refs.len() {
            lo[a0 + a] = 0.0;
            hi[a0 + a] = 1.0;
        }
        (lo, hi)
    }

    pub fn minimize(&self, z0: &DecisionVector, cfg: &MinimizeConfig) -> Result<(DecisionVector, Trace), PenaltyError> {
        minimize(self, z0, cfg)
    }
}

fn b_lo(r: &Region, j: usize) -> f64 {
    r.box_part().map_or(f64::NEG_INFINITY, |b| b.lo[j])
}

fn b_hi(r: &Region, j: usize) -> f64 {
    r.box_part().map_or(f64::INFINITY, |b| b.hi[j])
}

fn smooth_norm_sq(sq: f64, eps: f64) -> (f64, f64) {
    let s = math::sqrt(sq + eps * eps);
    if s == 0.0 {
        (0.0, 0.0)
    } else {
        (s - eps, 1.0 / s)
    }
}

/// Projection of weights onto `{α ≥ 0, Σα ≤ 1}`.
pub fn project_alphas(a: &mut [f64]) {
    for v in a.iter_mut() {
        *v = v.max(0.0);
    }
    let s: f64 = a.iter().sum();
    if s <= 1.0 {
        return;
    }
    // projection onto the unit simplex
    let mut sorted = a.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (i + 1) as f64;
        if *v - t > 0.0 {
            theta = t;
        }
    }
    for v in a.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeConfig {
    pub smoothing_schedule: Vec<f64>,
    pub max_iters: usize,
    /// Stage stops when the projected-gradient norm is below `pg_tol·(1 + |value|)`.
    pub pg_tol: f64,
    pub memory: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self { smoothing_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6], max_iters: 2000, pg_tol: 1e-8, memory: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub eps: f64,
    pub smoothed_value: f64,
    pub true_value: f64,
    /// Best exact value seen up to and including this stage.
    pub best_value: f64,
    pub iterations: usize,
    pub pg_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub start_value: f64,
    pub stages: Vec<StageRecord>,
}

impl Trace {
    pub fn final_value(&self) -> f64 {
        self.stages.last().map_or(self.start_value, |s| s.best_value)
    }
}

/// Smoothing continuation with projected L-BFGS per stage; returns the point
/// with the lowest exact value seen.
pub fn minimize(f: &PenaltyFunctional, z0: &DecisionVector, cfg: &MinimizeConfig) -> Result<(DecisionVector, Trace), PenaltyError> {
    f.check(z0)?;
    let (lo, hi) = f.bounds();
    let nx = z0.x.as_slice().len();
    let nu = z0.u.as_slice().len();
    let project = |z: &mut [f64]| {
        for i in 0..nx + nu {
            if lo[i].is_nan() {
                continue;
            }
            z[i] = z[i].max(lo[i]).min(hi[i]);
        }
        project_alphas(&mut z[nx + nu..]);
    };
    let frozen: Vec<bool> = lo.iter().map(|v| v.is_nan()).collect();
    let mut z = z0.flatten();
    // Frozen coordinates keep the start value; the rest start projected.
    project(&mut z);
    let mut work = z0.clone();
    work.unflatten(&z);
    let start_value = f.value(&work)?;
    let mut best = (start_value, work.clone());
    let mut trace = Trace { start_value, stages: Vec::new() };
    for &eps in &cfg.smoothing_schedule {
        let mut scratch = z0.clone();
        let mut eval = |zz: &[f64]| -> Result<(f64, Vec<f64>), PenaltyError> {
            scratch.unflatten(zz);
            let (v, mut g) = f.smoothed(&scratch, eps)?;
            for (gi, fr) in g.iter_mut().zip(&frozen) {
                if *fr {
                    *gi = 0.0;
                }
            }
            if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(PenaltyError::NotFinite { eps });
            }
            Ok((v, g))
        };
        let lcfg = LbfgsConfig { max_iters: cfg.max_iters, pg_tol: cfg.pg_tol, memory: cfg.memory };
        let res = lbfgs::run(&mut eval, &project, &lo, &hi, &z, &lcfg)?;
        if res.value > res.start_value + 1e-12 * (1.0 + res.start_value.abs()) {
            return Err(PenaltyError::StageIncrease { eps, start: res.start_value, end: res.value });
        }
        z = res.z;
        work.unflatten(&z);
        let true_value = f.value(&work)?;
        if true_value < best.0 {
            best = (true_value, work.clone());
        }
        trace.stages.push(StageRecord {
            eps,
            smoothed_value: res.value,
            true_value,
            best_value: best.0,
            iterations: res.iterations,
            pg_norm: res.pg_norm,
        });
    }
    Ok((best.1, trace))
}

#[cfg(test)]
mod tests;

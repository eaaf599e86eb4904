//! Second-order necessary conditions for strong minima.
//!
//! A critical direction `(h0, u, β)` is tied to a comparison control `w`; `h`
//! solves `ḣ = f_x h + f_u u + β (f(w) − f(ū))` from `h0`. With the costate `p`
//! of a multiplier `(λ, μ)` the form is
//!
//! ```text
//! Q = ½ Σⱼ λⱼ ℓⱼ''(h(0),h(T))² + ½ Σᵢ ∫ g_ixx(h,h) dμᵢ
//!     − ∫ [½ H''_{(x,u)}((h,u),(h,u)) + H_u v] dt
//!     + ∫ β [(H_x(ū) − H_x(w)) h + H_u(ū) u] dt.
//! ```
//!
//! `Q` is affine in the multiplier once `p` is written through the adjoint
//! responses, so its maximum over the multiplier polytope is one LP per sign
//! pattern of the equality weights. Integrals use the trapezoid rule per
//! interval with `p(tₖ+)` and `p(tₖ₊₁)` at the ends.

mod abstract_model;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::first_order::{
    Column, Costate, FirstOrderError, Measure, MultiplierConfig, MultiplierSystem, MultiplierTuple,
};
use crate::grid::Samples;
use crate::math::{self, Mat};
use crate::model::expr::ExprError;
use crate::model::problem::ProblemSpec;
use crate::trajectory::{integrate_variational, ControlProcess, TrajectoryError};

pub use abstract_model::{
    abstract_model_check, AbstractDirection, AbstractModel, AbstractReport, AbstractViolation, SublinearMax,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SecondOrderError {
    #[error("derivative evaluation failed on interval {interval}: {source}")]
    Expr { interval: usize, source: ExprError },
    #[error("endpoint derivative failed: {0}")]
    Endpoint(ExprError),
    #[error("state constraint derivative failed at node {node}: {source}")]
    State { node: usize, source: ExprError },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    FirstOrder(#[from] FirstOrderError),
    #[error("{what} has shape {got_len}x{got_dim}, expected {len}x{dim}")]
    Shape { what: &'static str, got_len: usize, got_dim: usize, len: usize, dim: usize },
    #[error("initial variation has length {got}, expected {expected}")]
    InitialLength { got: usize, expected: usize },
}

/// Critical direction `(h0, u, β)` associated with the comparison control `w`,
/// plus an optional second-order control variation `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalDirection {
    pub h0: Vec<f64>,
    /// One row per interval.
    pub u: Samples,
    pub beta: f64,
    pub w: Samples,
    /// Node samples of the variation, filled by [`CriticalDirection::integrate`].
    pub h: Option<Samples>,
    /// One row per interval; zero when absent.
    pub v: Option<Samples>,
}

impl CriticalDirection {
    pub fn new(h0: Vec<f64>, u: Samples, beta: f64, w: Samples) -> Self {
        Self { h0, u, beta, w, h: None, v: None }
    }

    pub fn zero(p: &ProblemSpec, base: &ControlProcess) -> Self {
        let nn = base.grid.intervals();
        Self::new(vec![0.0; p.n], Samples::zeros(nn, p.m), 0.0, base.u.clone())
    }

    pub fn with_v(mut self, v: Samples) -> Self {
        self.v = Some(v);
        self
    }

    fn check(&self, p: &ProblemSpec, base: &ControlProcess) -> Result<(), SecondOrderError> {
        let nn = base.grid.intervals();
        if self.h0.len() != p.n {
            return Err(SecondOrderError::InitialLength { got: self.h0.len(), expected: p.n });
        }
        let shape = |what, s: &Samples| {
            if s.len() != nn || s.dim() != p.m {
                Err(SecondOrderError::Shape { what, got_len: s.len(), got_dim: s.dim(), len: nn, dim: p.m })
            } else {
                Ok(())
            }
        };
        shape("direction u", &self.u)?;
        shape("comparison control w", &self.w)?;
        if let Some(v) = &self.v {
            shape("second-order variation v", v)?;
        }
        if let Some(h) = &self.h {
            if h.len() != nn + 1 || h.dim() != p.n {
                return Err(SecondOrderError::Shape { what: "variation h", got_len: h.len(), got_dim: h.dim(), len: nn + 1, dim: p.n });
            }
        }
        Ok(())
    }

    /// Integrate the variational equation and store `h`.
    pub fn integrate(&mut self, p: &ProblemSpec, base: &ControlProcess) -> Result<&Samples, SecondOrderError> {
        self.check(p, base)?;
        let h = integrate_variational(p, base, &self.h0, &self.u, self.beta, &self.w)?;
        Ok(self.h.insert(h))
    }

    /// `(c·h0, c·u, c·β)` with `c²·v`; `h` scales linearly. `w` is kept.
    pub fn scaled(&self, c: f64) -> Self {
        let sc = |s: &Samples, k: f64| {
            let mut out = s.clone();
            out.as_mut_slice().iter_mut().for_each(|v| *v *= k);
            out
        };
        Self {
            h0: math::scale(c, &self.h0),
            u: sc(&self.u, c),
            beta: c * self.beta,
            w: self.w.clone(),
            h: self.h.as_ref().map(|h| sc(h, c)),
            v: self.v.as_ref().map(|v| sc(v, c * c)),
        }
    }

    fn variation(&self, p: &ProblemSpec, base: &ControlProcess) -> Result<Samples, SecondOrderError> {
        self.check(p, base)?;
        match &self.h {
            Some(h) => Ok(h.clone()),
            None => Ok(integrate_variational(p, base, &self.h0, &self.u, self.beta, &self.w)?),
        }
    }

    fn v_row(&self, k: usize, m: usize) -> Vec<f64> {
        self.v.as_ref().map_or_else(|| vec![0.0; m], |v| v.row(k).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeViolation {
    NegativeBeta(f64),
    /// `ℓᵢ'(h(0),h(T)) > tol` for an active inequality or the cost.
    Endpoint { index: usize, value: f64 },
    Equality { index: usize, value: f64 },
    /// `gᵢ + g_ix h > tol` at a node.
    State { constraint: usize, node: usize, value: f64 },
    Tangent { interval: usize },
    /// `w(t) ∉ U(t)`.
    Comparison { interval: usize },
}

impl fmt::Display for ConeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeViolation::NegativeBeta(b) => write!(f, "beta = {b} is negative"),
            ConeViolation::Endpoint { index, value } => write!(f, "endpoint inequality {index}: derivative {value} > 0"),
            ConeViolation::Equality { index, value } => write!(f, "endpoint equality {index}: derivative {value} != 0"),
            ConeViolation::State { constraint, node, value } => {
                write!(f, "state constraint {constraint} at node {node}: linearization {value} > 0")
            }
            ConeViolation::Tangent { interval } => write!(f, "u is not tangent to U on interval {interval}"),
            ConeViolation::Comparison { interval } => write!(f, "w leaves U on interval {interval}"),
        }
    }
}

/// Membership of a direction in the critical cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    /// `(i, ℓᵢ'(h(0),h(T)))` for the cost and the active inequalities.
    pub endpoint: Vec<(usize, f64)>,
    pub equalities: Vec<(usize, f64)>,
    /// Largest `gᵢ(t,x̄) + g_ix h` over nodes; `None` without state constraints.
    pub state: Option<f64>,
    pub violations: Vec<ConeViolation>,
    pub member: bool,
}

pub fn critical_cone_check(
    p: &ProblemSpec,
    base: &ControlProcess,
    dir: &CriticalDirection,
    tol: f64,
) -> Result<ConeReport, SecondOrderError> {
    let h = dir.variation(p, base)?;
    let grid = &base.grid;
    let nn = grid.intervals();
    let mut violations = Vec::new();
    if dir.beta < 0.0 {
        violations.push(ConeViolation::NegativeBeta(dir.beta));
    }

    let (x0, xt) = (base.x0(), base.xt());
    let ell = p.ell(x0, xt).map_err(SecondOrderError::Endpoint)?;
    let mut dz = h.row(0).to_vec();
    dz.extend_from_slice(h.row(nn));
    let mut endpoint = Vec::new();
    let mut equalities = Vec::new();
    for j in 0..=p.r() {
        let inequality = j <= p.l;
        if j > 0 && inequality && ell[j] < -tol {
            continue;
        }
        let d = math::dot(&p.ell_grad(j, x0, xt).map_err(SecondOrderError::Endpoint)?, &dz);
        if inequality {
            if d > tol {
                violations.push(ConeViolation::Endpoint { index: j, value: d });
            }
            endpoint.push((j, d));
        } else {
            if d.abs() > tol {
                violations.push(ConeViolation::Equality { index: j, value: d });
            }
            equalities.push((j, d));
        }
    }

    let mut state: Option<f64> = None;
    for k in 0..=nn {
        let (t, x) = (grid.t(k), base.x.row(k));
        let g = p.g(t, x).map_err(|source| SecondOrderError::State { node: k, source })?;
        for (i, gi) in g.iter().enumerate() {
            let gx = p.g_x(i, t, x).map_err(|source| SecondOrderError::State { node: k, source })?;
            let value = gi + math::dot(&gx, h.row(k));
            if value > tol && !violations.iter().any(|v| matches!(v, ConeViolation::State { constraint, .. } if *constraint == i)) {
                violations.push(ConeViolation::State { constraint: i, node: k, value });
            }
            state = Some(state.map_or(value, |s| s.max(value)));
        }
    }

    for k in 0..nn {
        let region = p.control_set.on_interval(grid.t(k), grid.t(k + 1));
        let tangent = region
            .tangent_cone(base.u.row(k), tol)
            .is_some_and(|cone| cone.iter().zip(dir.u.row(k)).all(|(c, d)| c.contains(*d, tol)));
        if !tangent {
            violations.push(ConeViolation::Tangent { interval: k });
        }
        if dir.beta != 0.0 && !region.contains(dir.w.row(k), tol) {
            violations.push(ConeViolation::Comparison { interval: k });
        }
    }
    let member = violations.is_empty();
    Ok(ConeReport { endpoint, equalities, state, violations, member })
}

/// Step sizes `2⁻¹ … 2⁻²⁰` for the empirical `ξ`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=20).map(|k| math::pow(2.0, -(k as f64))).collect()
}

/// Second-order feasibility of a control variation pair `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub tangent: bool,
    pub second_tangent: bool,
    /// First interval where `u ∉ T(U,ū)` or `v ∉ T²(U,ū;u)`.
    pub offending_interval: Option<usize>,
    /// Empirical `ξ(t) = sup_λ ‖f_u‖ d(ū + λu, U) / λ²` per interval.
    pub xi: Vec<f64>,
    pub xi_integral: f64,
    pub feasible: bool,
}

pub fn second_order_feasibility_check(
    p: &ProblemSpec,
    base: &ControlProcess,
    u: &Samples,
    v: Option<&Samples>,
    lambda_grid: &[f64],
    tol: f64,
) -> Result<FeasibilityReport, SecondOrderError> {
    let grid = &base.grid;
    let nn = grid.intervals();
    for (what, s) in [("direction u", Some(u)), ("second-order variation v", v)] {
        if let Some(s) = s {
            if s.len() != nn || s.dim() != p.m {
                return Err(SecondOrderError::Shape { what, got_len: s.len(), got_dim: s.dim(), len: nn, dim: p.m });
            }
        }
    }
    let (mut tangent, mut second_tangent, mut offending) = (true, true, None);
    let mut xi = Vec::with_capacity(nn);
    for k in 0..nn {
        let region = p.control_set.on_interval(grid.t(k), grid.t(k + 1));
        let (ub, uk) = (base.u.row(k), u.row(k));
        let vk = v.map_or_else(|| vec![0.0; p.m], |v| v.row(k).to_vec());
        let tangent_k = region.tangent_cone(ub, tol).is_some_and(|c| c.iter().zip(uk).all(|(c, d)| c.contains(*d, tol)));
        let second_k = tangent_k
            && region.second_order_tangent(ub, uk, tol).is_some_and(|c| c.iter().zip(&vk).all(|(c, d)| c.contains(*d, tol)));
        if !tangent_k {
            tangent = false;
        }
        if !second_k {
            second_tangent = false;
        }
        if offending.is_none() && !second_k {
            offending = Some(k);
        }
        let t = grid.t(k);
        let (_, fu) = p.f_jac(t, base.x.row(k), ub).map_err(|source| SecondOrderError::Expr { interval: k, source })?;
        let norm = fu.op_norm();
        let mut sup: f64 = 0.0;
        for &lam in lambda_grid {
            if lam > 0.0 {
                let probe: Vec<f64> = ub.iter().zip(uk).map(|(a, d)| a + lam * d).collect();
                sup = sup.max(norm * region.project(&probe).1 / (lam * lam));
            }
        }
        xi.push(sup);
    }
    let xi_integral = (0..nn).map(|k| grid.step(k) * xi[k]).sum();
    Ok(FeasibilityReport { tangent, second_tangent, offending_interval: offending, xi, xi_integral, feasible: tangent && second_tangent })
}

/// Direction-dependent pieces of `Q`; the multiplier enters linearly.
struct FormData {
    /// `½ ℓⱼ''(h(0),h(T))²`, `j = 0..=r`.
    endpoint: Vec<f64>,
    /// `[node][i]` `½ g_ixx(h,h)`.
    state: Vec<Vec<f64>>,
    /// Integrand weights at `tₖ+` and `tₖ₊₁−`: the integrand there is `⟨p, c⟩`.
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    steps: Vec<f64>,
}

impl FormData {
    fn new(p: &ProblemSpec, base: &ControlProcess, dir: &CriticalDirection) -> Result<Self, SecondOrderError> {
        let h = dir.variation(p, base)?;
        let grid = &base.grid;
        let nn = grid.intervals();
        let (x0, xt) = (base.x0(), base.xt());
        let mut dz = h.row(0).to_vec();
        dz.extend_from_slice(h.row(nn));
        let endpoint = (0..=p.r())
            .map(|j| p.ell_hess(j, x0, xt).map(|m| 0.5 * m.quad(&dz)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(SecondOrderError::Endpoint)?;
        let state = (0..=nn)
            .map(|k| {
                (0..p.s())
                    .map(|i| p.g_xx(i, grid.t(k), base.x.row(k)).map(|m| 0.5 * m.quad(h.row(k))))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|source| SecondOrderError::State { node: k, source })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut left = Vec::with_capacity(nn);
        let mut right = Vec::with_capacity(nn);
        for k in 0..nn {
            let err = |source| SecondOrderError::Expr { interval: k, source };
            let (ub, uk, wk) = (base.u.row(k), dir.u.row(k), dir.w.row(k));
            let vk = dir.v_row(k, p.m);
            for (node, out) in [(k, &mut left), (k + 1, &mut right)] {
                let (t, x, hk) = (grid.t(node), base.x.row(node), h.row(node));
                let mut z = hk.to_vec();
                z.extend_from_slice(uk);
                let mut c = vec![0.0; p.n];
                for (i, e) in p.dynamics.iter().enumerate() {
                    c[i] = -0.5 * e.hessian(t, x, ub).map_err(err)?.quad(&z);
                }
                let (fx, fu) = p.f_jac(t, x, ub).map_err(err)?;
                math::axpy(-1.0, &fu.mul_vec(&vk), &mut c);
                if dir.beta != 0.0 {
                    let (fxw, _) = p.f_jac(t, x, wk).map_err(err)?;
                    let mut b = fx.mul_vec(hk);
                    math::axpy(-1.0, &fxw.mul_vec(hk), &mut b);
                    math::axpy(1.0, &fu.mul_vec(uk), &mut b);
                    math::axpy(dir.beta, &b, &mut c);
                }
                out.push(c);
            }
        }
        let steps = (0..nn).map(|k| grid.step(k)).collect();
        Ok(Self { endpoint, state, left, right, steps })
    }

    fn integral(&self, costate: &Costate) -> f64 {
        (0..self.steps.len())
            .map(|k| 0.5 * self.steps[k] * (math::dot(&costate.right(k), &self.left[k]) + math::dot(costate.left(k + 1), &self.right[k])))
            .sum()
    }

    fn evaluate(&self, lambdas: &[f64], measures: &[Measure], costate: &Costate) -> f64 {
        let mut q = math::dot(lambdas, &self.endpoint);
        for m in measures {
            for (node, w) in m.nodes.iter().zip(&m.weights) {
                q += w * self.state[*node][m.constraint];
            }
        }
        q + self.integral(costate)
    }

    /// Coefficient of each signed LP column.
    fn column_coefficients(&self, sys: &MultiplierSystem) -> Vec<f64> {
        sys.columns
            .iter()
            .zip(&sys.responses)
            .map(|(col, resp)| {
                let own = match *col {
                    Column::Lambda { index, .. } => self.endpoint[index],
                    Column::Mu { constraint, node } => self.state[node][constraint],
                };
                own + self.integral(resp)
            })
            .collect()
    }
}

fn check_lambdas(p: &ProblemSpec, mult: &MultiplierTuple) -> Result<(), SecondOrderError> {
    if mult.lambdas.len() != p.r() + 1 {
        return Err(FirstOrderError::LambdaCount { got: mult.lambdas.len(), expected: p.r() + 1 }.into());
    }
    Ok(())
}

/// `Q` at one multiplier. Integrates `h` when the direction does not carry it.
pub fn quadratic_form(
    p: &ProblemSpec,
    base: &ControlProcess,
    mult: &MultiplierTuple,
    dir: &CriticalDirection,
) -> Result<f64, SecondOrderError> {
    check_lambdas(p, mult)?;
    Ok(FormData::new(p, base, dir)?.evaluate(&mult.lambdas, &mult.measures, &mult.costate))
}

/// The `β = 0` form assembled from the Hamiltonian's blocks:
///
/// ```text
/// ½ Σ λⱼ ℓⱼ''(h(0),h(T))² + ½ Σᵢ ∫ g_ixx(h,h) dμᵢ − ∫ [½ (hᵀH_xx h + 2hᵀH_xu u + uᵀH_uu u) + H_u v] dt.
/// ```
///
/// It ignores `β` and `w`, and agrees with [`quadratic_form`] when `β = 0`.
pub fn reduced_quadratic_form(
    p: &ProblemSpec,
    base: &ControlProcess,
    mult: &MultiplierTuple,
    dir: &CriticalDirection,
) -> Result<f64, SecondOrderError> {
    check_lambdas(p, mult)?;
    let plain = CriticalDirection { beta: 0.0, ..dir.clone() };
    let h = plain.variation(p, base)?;
    let grid = &base.grid;
    let nn = grid.intervals();
    let (n, m) = (p.n, p.m);

    let mut dz = h.row(0).to_vec();
    dz.extend_from_slice(h.row(nn));
    let mut endpoint = 0.0;
    for (j, lam) in mult.lambdas.iter().enumerate() {
        if *lam != 0.0 {
            let hess = p.ell_hess(j, base.x0(), base.xt()).map_err(SecondOrderError::Endpoint)?;
            let mut s = 0.0;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    s += dz[a] * hess.get(a, b) * dz[b];
                }
            }
            endpoint += 0.5 * lam * s;
        }
    }

    let mut measure = 0.0;
    for mu in &mult.measures {
        for (node, w) in mu.nodes.iter().zip(&mu.weights) {
            let gxx = p.g_xx(mu.constraint, grid.t(*node), base.x.row(*node)).map_err(|source| SecondOrderError::State { node: *node, source })?;
            measure += 0.5 * w * gxx.quad(h.row(*node));
        }
    }

    let integrand = |k: usize, node: usize, pv: &[f64]| -> Result<f64, SecondOrderError> {
        let err = |source| SecondOrderError::Expr { interval: k, source };
        let (t, x, ub) = (grid.t(node), base.x.row(node), base.u.row(k));
        let mut hh = Mat::zeros(n + m, n + m);
        for (i, e) in p.dynamics.iter().enumerate() {
            if pv[i] == 0.0 {
                continue;
            }
            let hi = e.hessian(t, x, ub).map_err(err)?;
            for (acc, v) in hh.data.iter_mut().zip(&hi.data) {
                *acc += pv[i] * v;
            }
        }
        let (hk, uk) = (h.row(node), plain.u.row(k));
        let mut xx = 0.0;
        let mut xu = 0.0;
        let mut uu = 0.0;
        for a in 0..n {
            for b in 0..n {
                xx += hk[a] * hh.get(a, b) * hk[b];
            }
            for b in 0..m {
                xu += hk[a] * hh.get(a, n + b) * uk[b];
            }
        }
        for a in 0..m {
            for b in 0..m {
                uu += uk[a] * hh.get(n + a, n + b) * uk[b];
            }
        }
        let (_, fu) = p.f_jac(t, x, ub).map_err(err)?;
        let hu = fu.tmul_vec(pv);
        let hv = math::dot(&hu, &plain.v_row(k, m));
        Ok(0.5 * (xx + 2.0 * xu + uu) + hv)
    };
    let mut integral = 0.0;
    for k in 0..nn {
        let a = integrand(k, k, &mult.costate.right(k))?;
        let b = integrand(k, k + 1, mult.costate.left(k + 1))?;
        integral += 0.5 * grid.step(k) * (a + b);
    }
    Ok(endpoint + measure - integral)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocConfig {
    pub multipliers: MultiplierConfig,
    /// `Q_max ≥ −tol_soc` counts as nonnegative. Covers trapezoid error and the
    /// finite-difference Hessians (about `ε^{2/3}` relative each).
    pub tol_soc: f64,
    /// Tolerance for cone and tangent-set membership.
    pub tol_cone: f64,
    pub lambda_grid: Vec<f64>,
}

impl Default for SocConfig {
    fn default() -> Self {
        Self { multipliers: MultiplierConfig::default(), tol_soc: 1e-5, tol_cone: 1e-8, lambda_grid: default_lambda_grid() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocVerdict {
    Holds,
    Violated,
    /// The direction is not critical or not second-order feasible.
    Rejected,
    /// No multiplier exists, so the base fails the maximum principle.
    FirstOrderFailure,
}

impl fmt::Display for SocVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SocVerdict::Holds => "necessary condition holds at this resolution",
            SocVerdict::Violated => "second-order condition VIOLATED: not a strong minimum",
            SocVerdict::Rejected => "direction rejected: not a critical second-order feasible variation",
            SocVerdict::FirstOrderFailure => "first-order failure: no normalized multiplier exists",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocReport {
    pub cone: ConeReport,
    pub feasibility: FeasibilityReport,
    /// `Q` at the multiplier chosen by the first-order selection rule.
    pub q_value: Option<f64>,
    pub q_max: Option<f64>,
    pub multiplier: Option<MultiplierTuple>,
    pub maximizer: Option<MultiplierTuple>,
    /// Whether only the trivial tuple uses the equality weights alone.
    pub h12: bool,
    pub tol_soc: f64,
    pub verdict: SocVerdict,
}

/// Maximize `Q` over the multiplier polytope described by `comparisons`.
pub fn soc_certificate(
    p: &ProblemSpec,
    base: &ControlProcess,
    dir: &CriticalDirection,
    comparisons: &[Samples],
    cfg: &SocConfig,
) -> Result<SocReport, SecondOrderError> {
    let mut dir = dir.clone();
    if dir.h.is_none() {
        dir.integrate(p, base)?;
    }
    let cone = critical_cone_check(p, base, &dir, cfg.tol_cone)?;
    let feasibility = second_order_feasibility_check(p, base, &dir.u, dir.v.as_ref(), &cfg.lambda_grid, cfg.tol_cone)?;
    let mut report = SocReport {
        cone,
        feasibility,
        q_value: None,
        q_max: None,
        multiplier: None,
        maximizer: None,
        h12: false,
        tol_soc: cfg.tol_soc,
        verdict: SocVerdict::Rejected,
    };
    if !report.cone.member || !report.feasibility.feasible {
        return Ok(report);
    }
    let sys = MultiplierSystem::new(p, base, comparisons, &cfg.multipliers)?;
    report.h12 = !sys.feasible_with(|c| matches!(c, Column::Lambda { free: true, .. }), &cfg.multipliers)?;
    let Some(y) = sys.select(&cfg.multipliers)? else {
        report.verdict = SocVerdict::FirstOrderFailure;
        return Ok(report);
    };
    let data = FormData::new(p, base, &dir)?;
    let coeffs = data.column_coefficients(&sys);
    let q_value = math::dot(&coeffs, &y);
    report.multiplier = Some(sys.tuple(p, base, &y)?);
    report.q_value = Some(q_value);
    if let Some((value, ymax)) = sys.maximize(&coeffs, &cfg.multipliers)? {
        report.q_max = Some(value.max(q_value));
        report.maximizer = Some(sys.tuple(p, base, &ymax)?);
    } else {
        report.q_max = Some(q_value);
    }
    report.verdict = if report.q_max.unwrap_or(q_value) >= -cfg.tol_soc { SocVerdict::Holds } else { SocVerdict::Violated };
    Ok(report)
}

/// `Q` for bare weights; the costate is integrated from them.
pub fn quadratic_form_from_weights(
    p: &ProblemSpec,
    base: &ControlProcess,
    lambdas: &[f64],
    measures: &[Measure],
    dir: &CriticalDirection,
) -> Result<f64, SecondOrderError> {
    let costate = crate::first_order::integrate_adjoint(p, base, lambdas, measures)?;
    let mult = MultiplierTuple { lambdas: lambdas.to_vec(), measures: measures.to_vec(), costate };
    quadratic_form(p, base, &mult, dir)
}

#[cfg(test)]
mod tests;

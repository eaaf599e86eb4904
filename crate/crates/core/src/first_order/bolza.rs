//! Stationarity of the unconstrained model
//!
//! ```text
//! J(x, α) = φ(x) + ∫ ‖ẋ − ψ₀(t,x) − Σ αᵢ ψᵢ(t,x)‖ dt   on W¹¹ × ℝ₊ᵏ
//! ```
//!
//! at `(x̄, 0)`. Witnesses are a vector measure `ν ∈ ∂φ(x̄)` on the nodes, a
//! left-continuous `p` and `q = ∇ₓ⟨p, ψ₀⟩`. The relations checked are
//!
//! ```text
//! ∫⟨p, ψᵢ(t,x̄)⟩dt ≤ 0,   p(t) + ν([t,T]) − ∫ₜᵀ q ds = 0 (t > 0),   ν([0,T]) = ∫₀ᵀ q dt,   p(0) = ν({0}).
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, Samples};
use crate::math;
use crate::model::expr::{parse_expr, Expr, ExprError};

#[derive(Debug, Clone, PartialEq)]
pub struct BolzaModel {
    pub n: usize,
    /// `psi[0]` is the drift `ψ₀`; each entry has `n` components in `(t, x)`.
    pub psi: Vec<Vec<Expr>>,
}

impl BolzaModel {
    pub fn from_sources(n: usize, psi: &[&[&str]]) -> Result<Self, ExprError> {
        let psi = psi.iter().map(|v| v.iter().map(|s| parse_expr(s, n, 0)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { n, psi })
    }

    fn eval(&self, i: usize, t: f64, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.psi[i].iter().map(|e| e.eval(t, x, &[])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BolzaWitness {
    /// `(node, ν({tₙ}))`.
    pub nu: Vec<(usize, Vec<f64>)>,
    /// Left limits of `p` at the nodes.
    pub p: Samples,
    pub q: Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BolzaReport {
    /// `∫⟨p, ψᵢ⟩dt` for `i = 1..k`.
    pub directional: Vec<f64>,
    pub directional_residual: f64,
    pub costate_residual: f64,
    pub balance_residual: f64,
    pub initial_residual: f64,
    pub q_residual: f64,
    pub p_sup: f64,
    pub holds: bool,
}

fn trapezoid(grid: &Grid, vals: &[f64]) -> f64 {
    (0..grid.intervals()).map(|k| 0.5 * grid.step(k) * (vals[k] + vals[k + 1])).sum()
}

pub fn bolza_stationarity_check(
    model: &BolzaModel,
    grid: &Grid,
    xbar: &Samples,
    w: &BolzaWitness,
    tol: f64,
) -> Result<BolzaReport, ExprError> {
    let nn = grid.intervals();
    let n = model.n;
    let mut directional = Vec::new();
    for i in 1..model.psi.len() {
        let vals = (0..=nn).map(|k| Ok(math::dot(w.p.row(k), &model.eval(i, grid.t(k), xbar.row(k))?))).collect::<Result<Vec<_>, ExprError>>()?;
        directional.push(trapezoid(grid, &vals));
    }
    let directional_residual = directional.iter().fold(0.0f64, |m, v| m.max(*v));

    // Tail integrals ∫ₜₖᵀ q and tail masses ν([tₖ,T]).
    let mut q_tail = Samples::zeros(nn + 1, n);
    for k in (0..nn).rev() {
        let h = grid.step(k);
        for i in 0..n {
            let v = q_tail.row(k + 1)[i] + 0.5 * h * (w.q.row(k)[i] + w.q.row(k + 1)[i]);
            q_tail.row_mut(k)[i] = v;
        }
    }
    let mut nu_tail = Samples::zeros(nn + 2, n);
    for k in (0..=nn).rev() {
        let mut acc = nu_tail.row(k + 1).to_vec();
        for (node, m) in &w.nu {
            if *node == k {
                math::axpy(1.0, m, &mut acc);
            }
        }
        nu_tail.row_mut(k).copy_from_slice(&acc);
    }
    let mut costate_residual: f64 = 0.0;
    for k in 1..=nn {
        let r: Vec<f64> = (0..n).map(|i| w.p.row(k)[i] + nu_tail.row(k)[i] - q_tail.row(k)[i]).collect();
        costate_residual = costate_residual.max(math::norm(&r));
    }
    let balance_residual = math::dist(nu_tail.row(0), q_tail.row(0));
    let mut nu0 = vec![0.0; n];
    for (node, m) in &w.nu {
        if *node == 0 {
            math::axpy(1.0, m, &mut nu0);
        }
    }
    let initial_residual = math::dist(w.p.row(0), &nu0);

    let mut q_residual: f64 = 0.0;
    let mut p_sup: f64 = 0.0;
    for k in 0..=nn {
        let (t, x, pk) = (grid.t(k), xbar.row(k), w.p.row(k));
        let mut grad = vec![0.0; n];
        for (c, e) in model.psi[0].iter().enumerate() {
            math::axpy(pk[c], &e.grad(t, x, &[])?.0, &mut grad);
        }
        q_residual = q_residual.max(math::dist(&grad, w.q.row(k)));
        p_sup = p_sup.max(math::norm(pk));
    }
    let holds = directional_residual <= tol
        && costate_residual <= tol
        && balance_residual <= tol
        && initial_residual <= tol
        && q_residual <= tol
        && p_sup <= 1.0 + tol;
    Ok(BolzaReport { directional, directional_residual, costate_residual, balance_residual, initial_residual, q_residual, p_sup, holds })
}

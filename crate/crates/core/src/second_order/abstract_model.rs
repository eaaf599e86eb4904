//! Finite-dimensional model `J(x, u, α) = g(F₀(x,u) + Σ αᵢ Fᵢ(x,u))` with a
//! sublinear `g = max_j ⟨c_j, ·⟩`, `u ∈ U` and `α ≥ 0`.
//!
//! `Λ` is the set of `y* ∈ ∂g(ȳ)` with `(y*∘F₀)_x = 0` and `⟨y*, Fᵢ⟩ ≥ 0`. As
//! `∂g(ȳ)` is the hull of the active forms, `Λ` is a polytope in the convex
//! weights. A direction `(h, u, β)` is critical when
//! `g(ȳ + F₀'(h,u) + Σ βᵢ Fᵢ) ≤ g(ȳ)`, and the necessary condition reads
//!
//! ```text
//! sup_{y*∈Λ} ⟨y*, F₀''(h,u)² + 2 F₀ᵤ v + 2 Σ βᵢ (Fᵢₓ h + Fᵢᵤ u)⟩ ≥ 0,
//! ```
//!
//! the last term being the cross derivative of `(x, α) ↦ F₀ + Σ αᵢ Fᵢ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::lp::{Lp, LpOutcome, Rel};
use crate::math;
use crate::model::control_set::Region;
use crate::model::expr::{parse_expr, Expr, ExprError};

/// `g(y) = max_j ⟨c_j, y⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SublinearMax {
    pub forms: Vec<Vec<f64>>,
}

impl SublinearMax {
    pub fn new(forms: Vec<Vec<f64>>) -> Self {
        Self { forms }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.forms.iter().map(|c| math::dot(c, y)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Forms attaining the max within `tol·(1 + |g(y)|)`.
    pub fn active(&self, y: &[f64], tol: f64) -> Vec<usize> {
        let g = self.eval(y);
        let slack = tol * (1.0 + g.abs());
        (0..self.forms.len()).filter(|j| math::dot(&self.forms[*j], y) >= g - slack).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractModel {
    pub nx: usize,
    pub nu: usize,
    pub g: SublinearMax,
    /// `maps[0] = F₀`, then `F₁..F_k`; each has one expression per component of `y`.
    pub maps: Vec<Vec<Expr>>,
    /// Constraint set for `u`; unconstrained when absent.
    pub u_set: Option<Region>,
}

impl AbstractModel {
    /// Expressions use `x1..` for `x` and `u1..` for `u`.
    pub fn from_sources(
        nx: usize,
        nu: usize,
        forms: Vec<Vec<f64>>,
        maps: &[&[&str]],
        u_set: Option<Region>,
    ) -> Result<Self, ExprError> {
        let maps = maps.iter().map(|m| m.iter().map(|s| parse_expr(s, nx, nu)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { nx, nu, g: SublinearMax::new(forms), maps, u_set })
    }

    fn value(&self, i: usize, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.maps[i].iter().map(|e| e.eval(0.0, x, u)).collect()
    }

    fn directional(&self, i: usize, x: &[f64], u: &[f64], h: &[f64], du: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.maps[i].iter().map(|e| e.eval_dual(0.0, x, u, h, du).map(|d| d.d)).collect()
    }

    pub fn objective(&self, x: &[f64], u: &[f64], alpha: &[f64]) -> Result<f64, ExprError> {
        let mut y = self.value(0, x, u)?;
        for (i, a) in alpha.iter().enumerate() {
            math::axpy(*a, &self.value(i + 1, x, u)?, &mut y);
        }
        Ok(self.g.eval(&y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractDirection {
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub beta: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbstractViolation {
    /// `g(ȳ + F₀'(h,u) + Σ βᵢ Fᵢ) − g(ȳ) > tol`.
    Critical { excess: f64 },
    NegativeBeta { index: usize },
    /// `u ∉ T(U,ū)` or `v ∉ T²(U,ū;u)`.
    SecondTangent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractReport {
    /// Active forms of `g` at `ȳ`.
    pub active: Vec<usize>,
    pub lambda_empty: bool,
    pub critical_excess: f64,
    pub sup_form: Option<f64>,
    /// Maximizing `y*`.
    pub maximizer: Option<Vec<f64>>,
    pub violation: Option<AbstractViolation>,
    /// Direction admissible, `Λ` nonempty and `sup_form ≥ −tol`.
    pub holds: bool,
}

pub fn abstract_model_check(
    model: &AbstractModel,
    xbar: &[f64],
    ubar: &[f64],
    dir: &AbstractDirection,
    tol: f64,
) -> Result<AbstractReport, ExprError> {
    let nx = model.nx;
    let k = model.maps.len() - 1;
    let ybar = model.value(0, xbar, ubar)?;
    let active = model.g.active(&ybar, tol);
    let forms: Vec<&[f64]> = active.iter().map(|j| model.g.forms[*j].as_slice()).collect();

    // Critical set.
    let mut probe = ybar.clone();
    math::axpy(1.0, &model.directional(0, xbar, ubar, &dir.h, &dir.u)?, &mut probe);
    let mut fi_vals = Vec::with_capacity(k);
    for i in 1..=k {
        let fi = model.value(i, xbar, ubar)?;
        math::axpy(dir.beta.get(i - 1).copied().unwrap_or(0.0), &fi, &mut probe);
        fi_vals.push(fi);
    }
    let critical_excess = model.g.eval(&probe) - model.g.eval(&ybar);
    let mut violation = None;
    if let Some(index) = dir.beta.iter().position(|b| *b < 0.0) {
        violation = Some(AbstractViolation::NegativeBeta { index });
    } else if critical_excess > tol {
        violation = Some(AbstractViolation::Critical { excess: critical_excess });
    } else if let Some(region) = &model.u_set {
        let ok = region
            .second_order_tangent(ubar, &dir.u, tol)
            .is_some_and(|c| c.iter().zip(&dir.v).all(|(c, d)| c.contains(*d, tol)));
        if !ok {
            violation = Some(AbstractViolation::SecondTangent);
        }
    }

    // Λ in convex weights θ over the active forms.
    let na = forms.len();
    let mut lp = Lp::new(na);
    lp.add(vec![1.0; na], Rel::Eq, 1.0);
    let jac: Vec<Vec<f64>> = model.maps[0].iter().map(|e| e.grad(0.0, xbar, ubar).map(|g| g.0)).collect::<Result<_, _>>()?;
    for a in 0..nx {
        let row: Vec<f64> = forms.iter().map(|c| c.iter().zip(&jac).map(|(ci, gi)| ci * gi[a]).sum()).collect();
        lp.add(row, Rel::Eq, 0.0);
    }
    for fi in &fi_vals {
        lp.add(forms.iter().map(|c| math::dot(c, fi)).collect(), Rel::Ge, 0.0);
    }

    // z = F₀''(h,u)² + 2F₀ᵤ v + 2Σβᵢ(Fᵢₓh + Fᵢᵤu).
    let mut hu = dir.h.clone();
    hu.extend_from_slice(&dir.u);
    let mut z: Vec<f64> = model.maps[0].iter().map(|e| e.hessian(0.0, xbar, ubar).map(|m| m.quad(&hu))).collect::<Result<_, _>>()?;
    math::axpy(2.0, &model.directional(0, xbar, ubar, &vec![0.0; nx], &dir.v)?, &mut z);
    for i in 1..=k {
        let b = dir.beta.get(i - 1).copied().unwrap_or(0.0);
        if b != 0.0 {
            math::axpy(2.0 * b, &model.directional(i, xbar, ubar, &dir.h, &dir.u)?, &mut z);
        }
    }
    let obj: Vec<f64> = forms.iter().map(|c| math::dot(c, &z)).collect();
    let (sup_form, maximizer) = match lp.maximize(&obj) {
        Ok(LpOutcome::Optimal { x, value }) => {
            let mut y = vec![0.0; ybar.len()];
            for (theta, c) in x.iter().zip(&forms) {
                math::axpy(*theta, c, &mut y);
            }
            (Some(value), Some(y))
        }
        _ => (None, None),
    };
    let lambda_empty = sup_form.is_none();
    let holds = violation.is_none() && sup_form.is_some_and(|s| s >= -tol);
    Ok(AbstractReport { active, lambda_empty, critical_excess, sup_form, maximizer, violation, holds })
}

//! Problems of the form
//!
//! ```text
//! minimize ℓ₀(x(0), x(T))
//! ẋ = f(t, x, u),  u(t) ∈ U(t),  gᵢ(t, x(t)) ≤ 0,
//! ℓⱼ(x(0), x(T)) ≤ 0 (j = 1..l),  ℓⱼ(x(0), x(T)) = 0 (j = l+1..r)
//! ```
//!
//! Endpoint expressions see `x1..xn` as `x(0)` and `x(n+1)..x(2n)` as `x(T)`.
//! State constraints see `t` and `x1..xn` only.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::control_set::{ControlSet, ControlSetError};
use super::expr::{parse_expr, BinOp, Expr, ExprError, Pwc, Var};
use crate::grid::{Grid, Samples};
use crate::math::Mat;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("{field}[{index}]: {source}")]
    Expr { field: &'static str, index: usize, source: ExprError },
    #[error("expected {expected} dynamics expressions, got {got}")]
    DynamicsCount { expected: usize, got: usize },
    #[error("endpoint list needs the cost ℓ₀ and l = {l} ≤ r = {r}")]
    EndpointCount { l: usize, r: usize },
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("state dimension must be at least 1")]
    NoState,
    #[error("control set: {0}")]
    ControlSet(#[from] ControlSetError),
    #[error("time reparameterization needs a time-independent control set")]
    TimeDependentControlSet,
    #[error("reference control has {got} intervals / dimension {dim}, expected {expected} / {m}")]
    ReferenceShape { got: usize, dim: usize, expected: usize, m: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub horizon: f64,
    pub dynamics: Vec<Expr>,
    pub control_set: ControlSet,
    pub state_constraints: Vec<Expr>,
    pub endpoint: Vec<Expr>,
    pub l: usize,
}

fn check(field: &'static str, index: usize, e: &Expr, n: usize, m: usize) -> Result<(), ProblemError> {
    let (dn, dm) = e.dims_used();
    if dn > n {
        return Err(ProblemError::Expr {
            field,
            index,
            source: ExprError::Unbound { name: format!("x{}", dn), offset: 0 },
        });
    }
    if dm > m {
        return Err(ProblemError::Expr {
            field,
            index,
            source: ExprError::Unbound { name: format!("u{}", dm), offset: 0 },
        });
    }
    Ok(())
}

impl ProblemSpec {
    /// Build from expression trees, checking every invariant.
    pub fn new(
        n: usize,
        m: usize,
        horizon: f64,
        dynamics: Vec<Expr>,
        control_set: ControlSet,
        state_constraints: Vec<Expr>,
        endpoint: Vec<Expr>,
        l: usize,
    ) -> Result<Self, ProblemError> {
        let p = Self { n, m, horizon, dynamics, control_set, state_constraints, endpoint, l };
        p.validate()?;
        Ok(p)
    }

    /// Build from source strings.
    pub fn from_sources(
        n: usize,
        m: usize,
        horizon: f64,
        l: usize,
        dynamics: &[&str],
        state_constraints: &[&str],
        endpoint: &[&str],
        control_set: ControlSet,
    ) -> Result<Self, ProblemError> {
        let parse = |field: &'static str, srcs: &[&str], n, m| -> Result<Vec<Expr>, ProblemError> {
            srcs.iter()
                .enumerate()
                .map(|(index, s)| parse_expr(s, n, m).map_err(|source| ProblemError::Expr { field, index, source }))
                .collect()
        };
        let f = parse("dynamics", dynamics, n, m)?;
        let g = parse("state_constraints", state_constraints, n, 0)?;
        let e = parse("endpoint", endpoint, 2 * n, 0)?;
        Self::new(n, m, horizon, f, control_set, g, e, l)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.n == 0 {
            return Err(ProblemError::NoState);
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ProblemError::Horizon(self.horizon));
        }
        if self.dynamics.len() != self.n {
            return Err(ProblemError::DynamicsCount { expected: self.n, got: self.dynamics.len() });
        }
        if self.endpoint.is_empty() || self.l > self.endpoint.len() - 1 {
            return Err(ProblemError::EndpointCount { l: self.l, r: self.endpoint.len().saturating_sub(1) });
        }
        for (i, e) in self.dynamics.iter().enumerate() {
            check("dynamics", i, e, self.n, self.m)?;
        }
        for (i, e) in self.state_constraints.iter().enumerate() {
            check("state_constraints", i, e, self.n, 0)?;
        }
        for (i, e) in self.endpoint.iter().enumerate() {
            check("endpoint", i, e, 2 * self.n, 0)?;
        }
        self.control_set.validate(self.m)?;
        Ok(())
    }

    /// Index of the last endpoint function (`ℓ₀..ℓ_r`).
    pub fn r(&self) -> usize {
        self.endpoint.len() - 1
    }

    pub fn s(&self) -> usize {
        self.state_constraints.len()
    }

    pub fn f(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.dynamics.iter().map(|e| e.eval(t, x, u)).collect()
    }

    /// Jacobians `(f_x: n×n, f_u: n×m)`.
    pub fn f_jac(&self, t: f64, x: &[f64], u: &[f64]) -> Result<(Mat, Mat), ExprError> {
        let mut fx = Mat::zeros(self.n, self.n);
        let mut fu = Mat::zeros(self.n, self.m);
        for (i, e) in self.dynamics.iter().enumerate() {
            let (gx, gu) = e.grad(t, x, u)?;
            fx.data[i * self.n..(i + 1) * self.n].copy_from_slice(&gx);
            fu.data[i * self.m..(i + 1) * self.m].copy_from_slice(&gu);
        }
        Ok((fx, fu))
    }

    /// `f_x(t,x,u) h + f_u(t,x,u) w` in one forward pass per component.
    pub fn f_dir(&self, t: f64, x: &[f64], u: &[f64], h: &[f64], w: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.dynamics.iter().map(|e| e.eval_dual(t, x, u, h, w).map(|d| d.d)).collect()
    }

    pub fn g(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.state_constraints.iter().map(|e| e.eval(t, x, &[])).collect()
    }

    pub fn g_x(&self, i: usize, t: f64, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        Ok(self.state_constraints[i].grad(t, x, &[])?.0)
    }

    pub fn g_xx(&self, i: usize, t: f64, x: &[f64]) -> Result<Mat, ExprError> {
        self.state_constraints[i].hessian(t, x, &[])
    }

    fn stack(x0: &[f64], xt: &[f64]) -> Vec<f64> {
        let mut z = x0.to_vec();
        z.extend_from_slice(xt);
        z
    }

    pub fn ell(&self, x0: &[f64], xt: &[f64]) -> Result<Vec<f64>, ExprError> {
        let z = Self::stack(x0, xt);
        self.endpoint.iter().map(|e| e.eval(0.0, &z, &[])).collect()
    }

    /// Gradient of `ℓⱼ` over `(x(0), x(T))`, length `2n`.
    pub fn ell_grad(&self, j: usize, x0: &[f64], xt: &[f64]) -> Result<Vec<f64>, ExprError> {
        Ok(self.endpoint[j].grad(0.0, &Self::stack(x0, xt), &[])?.0)
    }

    pub fn ell_hess(&self, j: usize, x0: &[f64], xt: &[f64]) -> Result<Mat, ExprError> {
        self.endpoint[j].hessian(0.0, &Self::stack(x0, xt), &[])
    }

    /// Problem on `[0,1]` with state `(y, t)`, scalar control `v ≥ 0` and dynamics
    /// `(v·f(t, y, ū(Tτ)), v)`. Endpoint constraints gain `t(0) = 0` and `t(1) = T`
    /// as the last two equalities.
    pub fn augment_time_reparam(&self, grid: &Grid, ubar: &Samples) -> Result<ProblemSpec, ProblemError> {
        if self.control_set.is_time_dependent() {
            return Err(ProblemError::TimeDependentControlSet);
        }
        if ubar.len() != grid.intervals() || ubar.dim() != self.m {
            return Err(ProblemError::ReferenceShape {
                got: ubar.len(),
                dim: ubar.dim(),
                expected: grid.intervals(),
                m: self.m,
            });
        }
        let n = self.n;
        let big_t = self.horizon;
        // ū(Tτ) as a piecewise-constant function of τ, merged across equal neighbours.
        let controls: Vec<Expr> = (0..self.m)
            .map(|j| {
                let mut values = vec![ubar.row(0)[j]];
                let mut breaks = Vec::new();
                for k in 1..grid.intervals() {
                    let v = ubar.row(k)[j];
                    if v != values[values.len() - 1] {
                        breaks.push(grid.t(k) / big_t);
                        values.push(v);
                    }
                }
                if breaks.is_empty() {
                    Expr::Num(values[0])
                } else {
                    Expr::Pwc(Pwc { values, breaks })
                }
            })
            .collect();
        let time = Expr::x(n);
        let v = Expr::u(0);
        let mut dynamics: Vec<Expr> = self
            .dynamics
            .iter()
            .map(|e| {
                let inner = e.substitute(&|var| match var {
                    Var::T => time.clone(),
                    Var::X(i) => Expr::x(i),
                    Var::U(j) => controls[j].clone(),
                });
                Expr::mul(v.clone(), inner)
            })
            .collect();
        dynamics.push(v.clone());
        let state_constraints = self
            .state_constraints
            .iter()
            .map(|e| {
                e.substitute(&|var| match var {
                    Var::T => time.clone(),
                    other => Expr::Var(other),
                })
            })
            .collect();
        // x(0) block grows from n to n+1 entries, shifting x(T) indices by one.
        let mut endpoint: Vec<Expr> = self
            .endpoint
            .iter()
            .map(|e| {
                e.substitute(&|var| match var {
                    Var::X(i) if i >= n => Expr::x(i + 1),
                    other => Expr::Var(other),
                })
            })
            .collect();
        endpoint.push(Expr::x(n));
        endpoint.push(Expr::bin(BinOp::Sub, Expr::x(2 * n + 1), Expr::Num(big_t)));
        ProblemSpec::new(
            n + 1,
            1,
            1.0,
            dynamics,
            ControlSet::boxed(vec![0.0], vec![f64::INFINITY]),
            state_constraints,
            endpoint,
            self.l,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::Catalog;
    use alloc::string::ToString;

    fn example() -> ProblemSpec {
        Catalog::builtin().build("example-5-1", &[]).unwrap()
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let u = ControlSet::boxed(vec![0.0], vec![1.0]);
        assert!(matches!(
            ProblemSpec::from_sources(2, 1, 1.0, 0, &["u1"], &[], &["x4"], u.clone()),
            Err(ProblemError::DynamicsCount { .. })
        ));
        assert!(matches!(
            ProblemSpec::from_sources(1, 1, 1.0, 1, &["u1"], &[], &["x2"], u.clone()),
            Err(ProblemError::EndpointCount { .. })
        ));
        assert!(matches!(
            ProblemSpec::from_sources(1, 1, 1.0, 0, &["u1"], &["u1"], &["x2"], u.clone()),
            Err(ProblemError::Expr { field: "state_constraints", .. })
        ));
        assert!(matches!(
            ProblemSpec::from_sources(1, 1, -1.0, 0, &["u1"], &[], &["x2"], u),
            Err(ProblemError::Horizon(_))
        ));
    }

    #[test]
    fn endpoint_layout() {
        let p = example();
        assert_eq!(p.ell(&[0.1, 0.2], &[0.3, 0.4]).unwrap(), vec![0.4, 0.1, 0.2]);
        assert_eq!(p.ell_grad(0, &[0.0; 2], &[0.0; 2]).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.r(), 2);
    }

    #[test]
    fn reparam_of_example() {
        let p = example();
        let grid = Grid::uniform(1.0, 10).unwrap();
        let q = p.augment_time_reparam(&grid, &Samples::zeros(10, 1)).unwrap();
        assert_eq!((q.n, q.m, q.horizon), (3, 1, 1.0));
        // reference v ≡ T = 1, y = 0, t = τ
        let fx = q.f(0.3, &[0.0, 0.0, 0.3], &[1.0]).unwrap();
        assert_eq!(fx, vec![0.0, 0.0, 1.0]);
        let ell = q.ell(&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(ell, vec![0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(q.endpoint[0].to_string(), "x5");
    }

    #[test]
    fn reparam_trivial_dynamics() {
        let p = ProblemSpec::from_sources(1, 1, 1.0, 0, &["0"], &[], &["x2"], ControlSet::boxed(vec![0.0], vec![1.0]))
            .unwrap();
        let grid = Grid::uniform(1.0, 4).unwrap();
        let q = p.augment_time_reparam(&grid, &Samples::zeros(4, 1)).unwrap();
        assert_eq!(q.f(0.0, &[5.0, 0.2], &[2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn reparam_rejects_time_dependent_sets() {
        use crate::model::control_set::{BoxSet, Region};
        let mut p = example();
        p.control_set = ControlSet::scheduled(
            vec![Region::Box(BoxSet::new(vec![0.0], vec![1.0])), Region::Box(BoxSet::new(vec![0.0], vec![0.5]))],
            vec![0.5],
        )
        .unwrap();
        let grid = Grid::uniform(1.0, 4).unwrap();
        assert_eq!(
            p.augment_time_reparam(&grid, &Samples::zeros(4, 1)),
            Err(ProblemError::TimeDependentControlSet)
        );
    }

    #[test]
    fn reparam_embeds_nonconstant_reference() {
        let p = example();
        let grid = Grid::uniform(2.0, 4).unwrap();
        let ubar = Samples::from_rows(1, &[[0.25], [0.25], [0.0], [0.0]]);
        let mut p2 = p.clone();
        p2.horizon = 2.0;
        let q = p2.augment_time_reparam(&grid, &ubar).unwrap();
        // at τ = 0.25 (t = 0.5): ū = 0.25, f₂ = x1·sin(π/2) = x1
        let f = q.f(0.25, &[0.3, 0.0, 0.5], &[2.0]).unwrap();
        assert!((f[1] - 0.6).abs() < 1e-15);
        let f = q.f(0.75, &[0.3, 0.0, 1.5], &[2.0]).unwrap();
        assert_eq!(f[1], 0.0);
    }
}

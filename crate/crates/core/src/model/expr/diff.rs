use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::eval::{apply, pow};
use super::{BinOp, Expr, ExprError, Func, Func2, Var};
use crate::math::{self, Mat};

/// Value with one tangent component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    fn cst(v: f64) -> Self {
        Self { v, d: 0.0 }
    }
}

fn chain(op: &'static str, a: Dual, v: f64, slope: impl FnOnce() -> f64) -> Result<Dual, ExprError> {
    // A zero tangent skips the slope so that e.g. sqrt(0) with a constant argument stays defined.
    if a.d == 0.0 {
        return Ok(Dual::cst(v));
    }
    let d = slope() * a.d;
    if d.is_finite() {
        Ok(Dual { v, d })
    } else {
        Err(ExprError::Domain { op, value: a.v })
    }
}

impl Expr {
    /// Directional derivative along `(dx, du)` together with the value.
    pub fn eval_dual(&self, t: f64, x: &[f64], u: &[f64], dx: &[f64], du: &[f64]) -> Result<Dual, ExprError> {
        Ok(match self {
            Expr::Num(v) => Dual::cst(*v),
            Expr::Pi => Dual::cst(PI),
            Expr::Var(Var::T) => Dual::cst(t),
            Expr::Var(Var::X(i)) => Dual { v: x[*i], d: dx[*i] },
            Expr::Var(Var::U(j)) => Dual { v: u[*j], d: du[*j] },
            Expr::Pwc(p) => Dual::cst(p.at(t)),
            Expr::Neg(a) => {
                let a = a.eval_dual(t, x, u, dx, du)?;
                Dual { v: -a.v, d: -a.d }
            }
            Expr::Call(f, a) => {
                let a = a.eval_dual(t, x, u, dx, du)?;
                let v = apply(*f, a.v)?;
                match f {
                    Func::Sin => chain("sin", a, v, || math::cos(a.v))?,
                    Func::Cos => chain("cos", a, v, || -math::sin(a.v))?,
                    Func::Exp => chain("exp", a, v, || v)?,
                    Func::Log => chain("log", a, v, || 1.0 / a.v)?,
                    Func::Sqrt => chain("sqrt", a, v, || 0.5 / v)?,
                    Func::Abs => {
                        if a.v == 0.0 && a.d != 0.0 {
                            let r = a.d.abs();
                            return Err(ExprError::NonDifferentiable { func: "abs", lo: -r, hi: r });
                        }
                        Dual { v, d: if a.v < 0.0 { -a.d } else { a.d } }
                    }
                }
            }
            Expr::Call2(f, a, b) => {
                let a = a.eval_dual(t, x, u, dx, du)?;
                let b = b.eval_dual(t, x, u, dx, du)?;
                if a.v == b.v && a.d != b.d {
                    return Err(ExprError::NonDifferentiable { func: f.name(), lo: a.d.min(b.d), hi: a.d.max(b.d) });
                }
                let take_a = match f {
                    Func2::Max2 => a.v >= b.v,
                    Func2::Min2 => a.v <= b.v,
                };
                if take_a {
                    a
                } else {
                    b
                }
            }
            Expr::Bin(op, a, b) => {
                let a = a.eval_dual(t, x, u, dx, du)?;
                let b = b.eval_dual(t, x, u, dx, du)?;
                match op {
                    BinOp::Add => Dual { v: a.v + b.v, d: a.d + b.d },
                    BinOp::Sub => Dual { v: a.v - b.v, d: a.d - b.d },
                    BinOp::Mul => Dual { v: a.v * b.v, d: a.d * b.v + a.v * b.d },
                    BinOp::Div => {
                        if b.v == 0.0 {
                            return Err(ExprError::Domain { op: "/", value: b.v });
                        }
                        let v = a.v / b.v;
                        Dual { v, d: (a.d - v * b.d) / b.v }
                    }
                    BinOp::Pow => {
                        let v = pow(a.v, b.v)?;
                        let mut d = 0.0;
                        if a.d != 0.0 {
                            d += b.v * pow(a.v, b.v - 1.0)? * a.d;
                        }
                        if b.d != 0.0 && a.v != 0.0 {
                            if a.v < 0.0 {
                                return Err(ExprError::Domain { op: "^", value: a.v });
                            }
                            d += v * math::ln(a.v) * b.d;
                        }
                        Dual { v, d }
                    }
                }
            }
        })
        .and_then(|r| {
            if r.v.is_finite() && r.d.is_finite() {
                Ok(r)
            } else {
                Err(ExprError::Domain { op: "evaluation", value: r.v })
            }
        })
    }

    /// Exact gradient `(∂/∂x, ∂/∂u)` by one forward pass per coordinate.
    pub fn grad(&self, t: f64, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ExprError> {
        let (n, m) = (x.len(), u.len());
        let mut gx = vec![0.0; n];
        let mut gu = vec![0.0; m];
        let mut dx = vec![0.0; n];
        let mut du = vec![0.0; m];
        let (need_n, need_m) = self.dims_used();
        for i in 0..n.min(need_n) {
            dx[i] = 1.0;
            gx[i] = self.eval_dual(t, x, u, &dx, &du)?.d;
            dx[i] = 0.0;
        }
        for j in 0..m.min(need_m) {
            du[j] = 1.0;
            gu[j] = self.eval_dual(t, x, u, &dx, &du)?.d;
            du[j] = 0.0;
        }
        if need_n == 0 && need_m == 0 {
            self.eval(t, x, u)?;
        }
        Ok((gx, gu))
    }

    /// Gradient over the stacked variable `z = (x, u)`.
    pub fn grad_z(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ExprError> {
        let (mut gx, gu) = self.grad(t, x, u)?;
        gx.extend(gu);
        Ok(gx)
    }

    /// Symmetric Hessian over `(x, u)`: central differences of the exact gradient.
    pub fn hessian(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Mat, ExprError> {
        let (n, m) = (x.len(), u.len());
        let dim = n + m;
        let mut z: Vec<f64> = x.iter().chain(u).copied().collect();
        let h = math::cbrt(f64::EPSILON) * math::norm(&z).max(1.0);
        let mut raw = Mat::zeros(dim, dim);
        for j in 0..dim {
            let z0 = z[j];
            z[j] = z0 + h;
            let gp = self.grad_z(t, &z[..n], &z[n..])?;
            z[j] = z0 - h;
            let gm = self.grad_z(t, &z[..n], &z[n..])?;
            z[j] = z0;
            // Use the realized step to absorb rounding in z0 ± h.
            let step = (z0 + h) - (z0 - h);
            for i in 0..dim {
                raw.set(i, j, (gp[i] - gm[i]) / step);
            }
        }
        let mut out = Mat::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                out.set(i, j, 0.5 * (raw.get(i, j) + raw.get(j, i)));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_expr;

    #[test]
    fn example_dynamics_gradient_at_origin() {
        let e = parse_expr("x1*sin(2*pi*u1)", 2, 1).unwrap();
        let (gx, gu) = e.grad(0.0, &[0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(gx, vec![0.0, 0.0]);
        assert_eq!(gu, vec![0.0]);
    }

    #[test]
    fn bilinear_and_constant() {
        let e = parse_expr("x1*u1", 1, 1).unwrap();
        assert_eq!(e.grad(0.0, &[2.0], &[3.0]).unwrap(), (vec![3.0], vec![2.0]));
        let c = parse_expr("4", 1, 1).unwrap();
        assert_eq!(c.grad(0.0, &[2.0], &[3.0]).unwrap(), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn abs_kink_reports_subgradient() {
        let e = parse_expr("abs(2*x1)", 1, 0).unwrap();
        match e.grad(0.0, &[0.0], &[]) {
            Err(ExprError::NonDifferentiable { func: "abs", lo, hi }) => {
                assert_eq!((lo, hi), (-2.0, 2.0));
            }
            other => panic!("unexpected {:?}", other),
        }
        let e = parse_expr("max2(x1, u1)", 1, 1).unwrap();
        assert!(matches!(e.grad(0.0, &[1.0], &[1.0]), Err(ExprError::NonDifferentiable { .. })));
        assert_eq!(e.grad(0.0, &[1.0], &[2.0]).unwrap(), (vec![0.0], vec![1.0]));
    }

    #[test]
    fn hessians() {
        let e = parse_expr("x1*u1", 1, 1).unwrap();
        let h = e.hessian(0.0, &[0.4], &[-1.3]).unwrap();
        assert!((h.get(0, 1) - 1.0).abs() < 1e-9 && h.get(0, 0).abs() < 1e-9 && h.get(1, 1).abs() < 1e-9);
        let e = parse_expr("x1^2", 1, 0).unwrap();
        assert!((e.hessian(0.0, &[0.7], &[]).unwrap().get(0, 0) - 2.0).abs() < 1e-8);
        let e = parse_expr("x1*sin(2*pi*u1)", 2, 1).unwrap();
        let h = e.hessian(0.0, &[0.0, 0.0], &[0.0]).unwrap();
        assert!((h.get(0, 2) - 2.0 * PI).abs() < 1e-8);
        assert_eq!(h.max_abs_asymmetry(), 0.0);
    }

    #[test]
    fn pow_with_variable_exponent() {
        let e = parse_expr("x1^u1", 1, 1).unwrap();
        let (gx, gu) = e.grad(0.0, &[2.0], &[3.0]).unwrap();
        assert!((gx[0] - 12.0).abs() < 1e-12);
        assert!((gu[0] - 8.0 * math::ln(2.0)).abs() < 1e-12);
    }
}

use core::f64::consts::PI;

use super::{BinOp, Expr, ExprError, Func, Func2, Var};
use crate::math;

fn finite(op: &'static str, arg: f64, v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Domain { op, value: arg })
    }
}

pub(super) fn pow(a: f64, b: f64) -> Result<f64, ExprError> {
    if a < 0.0 && b != math::round(b) {
        return Err(ExprError::Domain { op: "^", value: a });
    }
    if a == 0.0 && b < 0.0 {
        return Err(ExprError::Domain { op: "^", value: a });
    }
    finite("^", a, math::pow(a, b))
}

pub(super) fn apply(f: Func, a: f64) -> Result<f64, ExprError> {
    match f {
        Func::Sin => Ok(math::sin(a)),
        Func::Cos => Ok(math::cos(a)),
        Func::Exp => finite("exp", a, math::exp(a)),
        Func::Log if a <= 0.0 => Err(ExprError::Domain { op: "log", value: a }),
        Func::Log => Ok(math::ln(a)),
        Func::Sqrt if a < 0.0 => Err(ExprError::Domain { op: "sqrt", value: a }),
        Func::Sqrt => Ok(math::sqrt(a)),
        Func::Abs => Ok(a.abs()),
    }
}

impl Expr {
    /// Evaluate at `(t, x, u)`. Slices shorter than the referenced indices panic.
    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => PI,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X(i)) => x[*i],
            Expr::Var(Var::U(j)) => u[*j],
            Expr::Pwc(p) => p.at(t),
            Expr::Neg(a) => -a.eval(t, x, u)?,
            Expr::Call(f, a) => apply(*f, a.eval(t, x, u)?)?,
            Expr::Call2(f, a, b) => {
                let (a, b) = (a.eval(t, x, u)?, b.eval(t, x, u)?);
                match f {
                    Func2::Max2 => a.max(b),
                    Func2::Min2 => a.min(b),
                }
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(t, x, u)?, b.eval(t, x, u)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b == 0.0 => return Err(ExprError::Domain { op: "/", value: b }),
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b)?,
                }
            }
        };
        finite("evaluation", v, v)
    }
}

#[cfg(test)]
mod tests {
    use crate::parse_expr;
    use crate::ExprError;

    #[test]
    fn example_dynamics_value() {
        let e = parse_expr("x1*sin(2*pi*u1)", 2, 1).unwrap();
        let v = e.eval(0.5, &[0.3, 0.0], &[0.25]).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn identity_point() {
        assert_eq!(parse_expr("u1", 1, 1).unwrap().eval(0.0, &[0.0], &[7.0]).unwrap(), 7.0);
    }

    #[test]
    fn domain_errors_never_nan() {
        let e = parse_expr("log(x1)", 1, 0).unwrap();
        assert!(matches!(e.eval(0.0, &[0.0], &[]), Err(ExprError::Domain { op: "log", .. })));
        let e = parse_expr("sqrt(x1)", 1, 0).unwrap();
        assert!(e.eval(0.0, &[-1.0], &[]).is_err());
        let e = parse_expr("x1^0.5", 1, 0).unwrap();
        assert!(e.eval(0.0, &[-1.0], &[]).is_err());
        let e = parse_expr("1/x1", 1, 0).unwrap();
        assert!(e.eval(0.0, &[0.0], &[]).is_err());
        let e = parse_expr("exp(x1)", 1, 0).unwrap();
        assert!(e.eval(0.0, &[1e4], &[]).is_err());
    }
}

//! Expression trees for dynamics, state constraints and endpoint functions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | 't' | 'pi' | 'x<i>' | 'u<j>' | func '(' args ')' | '(' sum ')'
//! ```
//!
//! Functions: `sin cos exp log sqrt abs` (one argument), `max2 min2` (two
//! arguments) and `pwc(v0, b1, v1, …, bk, vk)`, a piecewise-constant function
//! of time with constant arguments (value `v_i` on `[b_i, b_{i+1})`).
//!
//! Variable indices are 1-based in source text and 0-based in the tree.

mod diff;
mod eval;
mod parse;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use diff::Dual;
pub use parse::parse_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X(usize),
    U(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Max2,
    Min2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Piecewise-constant function of `t`: `values[i]` on `[breaks[i-1], breaks[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwc {
    pub values: Vec<f64>,
    pub breaks: Vec<f64>,
}

impl Pwc {
    pub fn new(values: Vec<f64>, breaks: Vec<f64>) -> Option<Self> {
        if values.len() != breaks.len() + 1 {
            return None;
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) || values.iter().chain(&breaks).any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { values, breaks })
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= t);
        self.values[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
    Pwc(Pwc),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unbound variable `{name}` at byte {offset}")]
    Unbound { name: String, offset: usize },
    #[error("domain error in {op} at argument {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("{func} is not differentiable here; directional derivative lies in [{lo}, {hi}]")]
    NonDifferentiable { func: &'static str, lo: f64, hi: f64 },
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn x(i: usize) -> Self {
        Expr::Var(Var::X(i))
    }

    pub fn u(j: usize) -> Self {
        Expr::Var(Var::U(j))
    }

    pub fn t() -> Self {
        Expr::Var(Var::T)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Self::bin(BinOp::Add, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Self::bin(BinOp::Mul, a, b)
    }

    pub fn neg(a: Expr) -> Self {
        Expr::Neg(Box::new(a))
    }

    pub fn call(f: Func, a: Expr) -> Self {
        Expr::Call(f, Box::new(a))
    }

    /// Largest state and control index referenced, as counts (`1 + max index`).
    pub fn dims_used(&self) -> (usize, usize) {
        let mut n = 0;
        let mut m = 0;
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                match *v {
                    Var::X(i) => n = n.max(i + 1),
                    Var::U(j) => m = m.max(j + 1),
                    Var::T => {}
                }
            }
        });
        (n, m)
    }

    pub fn uses_time(&self) -> bool {
        let mut used = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Var(Var::T) | Expr::Pwc(_)) {
                used = true;
            }
        });
        used
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Call(_, a) => a.visit(f),
            Expr::Bin(_, a, b) | Expr::Call2(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Num(_) | Expr::Pi | Expr::Var(_) | Expr::Pwc(_) => {}
        }
    }

    /// Rebuild the tree with every variable replaced by `sub(var)`.
    pub fn substitute(&self, sub: &impl Fn(Var) -> Expr) -> Expr {
        match self {
            Expr::Var(v) => sub(*v),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(sub))),
            Expr::Call(fun, a) => Expr::Call(*fun, Box::new(a.substitute(sub))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.substitute(sub)), Box::new(b.substitute(sub))),
            Expr::Call2(fun, a, b) => Expr::Call2(*fun, Box::new(a.substitute(sub)), Box::new(b.substitute(sub))),
            Expr::Num(_) | Expr::Pi | Expr::Pwc(_) => self.clone(),
        }
    }
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

impl Func2 {
    pub fn name(self) -> &'static str {
        match self {
            Func2::Max2 => "max2",
            Func2::Min2 => "min2",
        }
    }
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

struct Lit(f64);

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Debug output is the shortest representation that parses back to the same bits.
        if self.0 < 0.0 {
            write!(f, "-{:?}", -self.0)
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

/// Fully parenthesized; parsing the output reproduces the tree exactly.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{:?}", v),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::U(j)) => write!(f, "u{}", j + 1),
            Expr::Neg(a) if matches!(**a, Expr::Num(_)) => write!(f, "(-({}))", a),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Bin(op, a, b) => write!(f, "({} {} {})", a, op.symbol(), b),
            Expr::Call(fun, a) => write!(f, "{}({})", fun.name(), a),
            Expr::Call2(fun, a, b) => write!(f, "{}({}, {})", fun.name(), a, b),
            Expr::Pwc(p) => {
                write!(f, "pwc({}", Lit(p.values[0]))?;
                for (b, v) in p.breaks.iter().zip(&p.values[1..]) {
                    write!(f, ", {}, {}", Lit(*b), Lit(*v))?;
                }
                f.write_str(")")
            }
        }
    }
}

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BinOp, Expr, ExprError, Func, Func2, Pwc, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(u8),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c),
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let s = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                return Ok((Tok::Ident(s.to_string()), start));
            }
            _ => return Err(syntax(start, "unexpected character")),
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ExprError> {
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = start;
        let mut any = digits(&mut p);
        if p < s.len() && s[p] == b'.' {
            p += 1;
            any |= digits(&mut p);
        }
        if !any {
            return Err(syntax(start, "malformed number"));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                return Err(syntax(p, "malformed exponent"));
            }
        }
        let text = core::str::from_utf8(&s[start..p]).unwrap_or("");
        let v: f64 = text.parse().map_err(|_| syntax(start, "malformed number"))?;
        self.pos = p;
        Ok((Tok::Num(v), start))
    }
}

fn syntax(offset: usize, message: &str) -> ExprError {
    ExprError::Syntax { offset, message: message.to_string() }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
    n: usize,
    m: usize,
}

/// Parse `source` against state dimension `n` and control dimension `m`.
///
/// ```
/// use plab_core::parse_expr;
/// let e = parse_expr("x1*sin(2*pi*u1)", 2, 1).unwrap();
/// assert_eq!(e.eval(0.5, &[0.3, 0.0], &[0.25]).unwrap(), 0.3);
/// ```
pub fn parse_expr(source: &str, n: usize, m: usize) -> Result<Expr, ExprError> {
    let mut lex = Lexer { src: source.as_bytes(), pos: 0 };
    let (tok, at) = lex.next()?;
    if tok == Tok::End {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser { lex, tok, at, n, m };
    let e = p.sum()?;
    if p.tok != Tok::End {
        return Err(syntax(p.at, "unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, at) = self.lex.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if self.tok == want {
            self.bump()
        } else {
            Err(syntax(self.at, &format!("expected {}", what)))
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.tok {
                Tok::Op(b'+') => BinOp::Add,
                Tok::Op(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op(b'*') => BinOp::Mul,
                Tok::Op(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.tok == Tok::Op(b'-') {
            self.bump()?;
            // A signed literal is one number, except as the base of a power.
            if let Tok::Num(v) = self.tok {
                self.bump()?;
                if self.tok != Tok::Op(b'^') {
                    return Ok(Expr::Num(-v));
                }
                self.bump()?;
                let exp = self.unary()?;
                return Ok(Expr::neg(Expr::bin(BinOp::Pow, Expr::Num(v), exp)));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.tok == Tok::Op(b'^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let at = self.at;
        match core::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok == Tok::LParen {
                    self.bump()?;
                    return self.call(&name, at);
                }
                self.variable(&name, at)
            }
            _ => Err(syntax(at, "expected operand")),
        }
    }

    fn variable(&self, name: &str, at: usize) -> Result<Expr, ExprError> {
        match name {
            "t" => return Ok(Expr::Var(Var::T)),
            "pi" => return Ok(Expr::Pi),
            _ => {}
        }
        let unbound = || ExprError::Unbound { name: name.to_string(), offset: at };
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(unbound());
        }
        let idx: usize = digits.parse().map_err(|_| unbound())?;
        match kind {
            "x" if idx <= self.n => Ok(Expr::Var(Var::X(idx - 1))),
            "u" if idx <= self.m => Ok(Expr::Var(Var::U(idx - 1))),
            _ => Err(unbound()),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ExprError> {
        let mut out = Vec::new();
        loop {
            out.push(self.sum()?);
            match self.tok {
                Tok::Comma => self.bump()?,
                Tok::RParen => {
                    self.bump()?;
                    return Ok(out);
                }
                _ => return Err(syntax(self.at, "expected `,` or `)`")),
            }
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Expr, ExprError> {
        let f1 = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        let f2 = match name {
            "max2" => Some(Func2::Max2),
            "min2" => Some(Func2::Min2),
            _ => None,
        };
        if f1.is_none() && f2.is_none() && name != "pwc" {
            return Err(syntax(at, &format!("unknown function `{}`", name)));
        }
        let mut args = self.args()?;
        if let Some(f) = f1 {
            if args.len() != 1 {
                return Err(syntax(at, &format!("{} takes one argument", name)));
            }
            return Ok(Expr::Call(f, Box::new(args.remove(0))));
        }
        if let Some(f) = f2 {
            if args.len() != 2 {
                return Err(syntax(at, &format!("{} takes two arguments", name)));
            }
            let b = args.pop().unwrap_or(Expr::Num(0.0));
            let a = args.pop().unwrap_or(Expr::Num(0.0));
            return Ok(Expr::Call2(f, Box::new(a), Box::new(b)));
        }
        // pwc: constant arguments only
        if args.len() % 2 == 0 {
            return Err(syntax(at, "pwc takes an odd number of arguments"));
        }
        let mut consts = Vec::with_capacity(args.len());
        for a in &args {
            if a.dims_used() != (0, 0) || a.uses_time() {
                return Err(syntax(at, "pwc arguments must be constant"));
            }
            consts.push(a.eval(0.0, &[], &[]).map_err(|_| syntax(at, "pwc argument is not finite"))?);
        }
        let values = consts.iter().step_by(2).copied().collect();
        let breaks = consts.iter().skip(1).step_by(2).copied().collect();
        Pwc::new(values, breaks)
            .map(Expr::Pwc)
            .ok_or_else(|| syntax(at, "pwc breakpoints must increase strictly"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn malformed_input_reports_offset() {
        match parse_expr("x1 + * u1", 2, 1) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn unbound_state_index() {
        assert!(matches!(parse_expr("x3", 2, 1), Err(ExprError::Unbound { offset: 0, .. })));
        assert!(matches!(parse_expr("u1", 1, 0), Err(ExprError::Unbound { .. })));
        assert!(matches!(parse_expr("x0", 1, 0), Err(ExprError::Unbound { .. })));
        assert!(matches!(parse_expr("y", 1, 0), Err(ExprError::Unbound { .. })));
    }

    #[test]
    fn constant_zero() {
        assert_eq!(parse_expr("0", 1, 1).unwrap(), Expr::Num(0.0));
        assert!(parse_expr("  ", 1, 1).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("-2^2", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]).unwrap(), -4.0);
        let e = parse_expr("2^3^2", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]).unwrap(), 512.0);
        let e = parse_expr("2^-1", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]).unwrap(), 0.5);
        let e = parse_expr("8/4/2 - 1 - 1", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]).unwrap(), -1.0);
        assert_eq!(parse_expr("1e-3 + .5", 0, 0).unwrap().eval(0.0, &[], &[]).unwrap(), 0.501);
    }

    #[test]
    fn function_arity_is_checked() {
        assert!(parse_expr("sin(x1, x1)", 1, 0).is_err());
        assert!(parse_expr("max2(x1)", 1, 0).is_err());
        assert!(parse_expr("foo(x1)", 1, 0).is_err());
        assert!(parse_expr("sin(x1", 1, 0).is_err());
    }

    #[test]
    fn pwc_parses_constants() {
        let e = parse_expr("pwc(0.75, 0.1, 0)", 0, 0).unwrap();
        assert_eq!(e.eval(0.05, &[], &[]).unwrap(), 0.75);
        assert_eq!(e.eval(0.1, &[], &[]).unwrap(), 0.0);
        assert!(parse_expr("pwc(1, 0.5)", 0, 0).is_err());
        assert!(parse_expr("pwc(1, x1, 2)", 1, 0).is_err());
        assert!(parse_expr("pwc(1, 0.5, 2, 0.5, 3)", 0, 0).is_err());
        let round = parse_expr(&e.to_string(), 0, 0).unwrap();
        assert_eq!(round, e);
    }
}

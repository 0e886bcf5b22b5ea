//! Expression language for metric, gauge and potential components.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | 'x' digits | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-x0^2`
//! is `-(x0^2)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use crate::error::{Error, Result};
use crate::scalar::{fm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Atan,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Atan => "atan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at offset {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("coordinate x{index} out of range for dimension {dim}")]
    CoordinateOutOfRange { index: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> core::result::Result<Self, ParseError> {
        let mut p = Parser {
            src,
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
            dim,
        };
        p.advance()?;
        Ok(p)
    }

    fn syntax(&self, offset: usize, message: &str) -> ParseError {
        ParseError::Syntax {
            offset,
            message: message.to_string(),
        }
    }

    fn advance(&mut self) -> core::result::Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
            {
                self.pos += 1;
            }
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let save = self.pos;
                self.pos += 1;
                if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                    self.pos += 1;
                }
                if self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                } else {
                    self.pos = save;
                }
            }
            let text = &self.src[start..self.pos];
            let v: f64 = text
                .parse()
                .map_err(|_| self.syntax(start, "malformed number"))?;
            self.tok = Tok::Num(v);
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
        } else {
            self.pos += 1;
            self.tok = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = self.src[self.tok_start..].chars().next().unwrap_or('?');
                    return Err(
                        self.syntax(self.tok_start, &format!("unexpected character `{ch}`"))
                    );
                }
            };
        }
        Ok(())
    }

    fn expr(&mut self) -> core::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = self.tok {
            self.advance()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> core::result::Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = self.tok {
            self.advance()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> core::result::Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.advance()?;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> core::result::Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.advance()?;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> core::result::Result<Expr, ParseError> {
        let start = self.tok_start;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(self.syntax(self.tok_start, "expected `)`"));
                }
                self.advance()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance()?;
                if name == "pi" {
                    return Ok(Expr::Num(core::f64::consts::PI));
                }
                if let Some(f) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return Err(self.syntax(self.tok_start, "expected `(` after function name"));
                    }
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(self.syntax(self.tok_start, "expected `)`"));
                    }
                    self.advance()?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if let Some(digits) = name.strip_prefix('x') {
                    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                        let index: usize =
                            digits.parse().map_err(|_| ParseError::UnknownSymbol {
                                name: name.clone(),
                                offset: start,
                            })?;
                        if index >= self.dim {
                            return Err(ParseError::CoordinateOutOfRange {
                                index,
                                dim: self.dim,
                            });
                        }
                        return Ok(Expr::Var(index));
                    }
                }
                Err(ParseError::UnknownSymbol {
                    name,
                    offset: start,
                })
            }
            Tok::End => Err(self.syntax(start, "unexpected end of input")),
            Tok::Op(c) => Err(self.syntax(start, &format!("unexpected `{c}`"))),
            Tok::RParen => Err(self.syntax(start, "unexpected `)`")),
        }
    }
}

/// Parses `src` as an expression in the coordinates `x0 .. x{dim-1}`.
pub fn parse_expression(src: &str, dim: usize) -> core::result::Result<Expr, ParseError> {
    let mut p = Parser::new(src, dim)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.syntax(p.tok_start, "unexpected trailing input"));
    }
    Ok(e)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write!(f, "{e}")?;
        write!(f, ")")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v == core::f64::consts::PI {
                    write!(f, "pi")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                write_at(f, e, 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 1, 2),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                };
                write_at(f, l, lp)?;
                write!(f, " {sym} ")?;
                write_at(f, r, rp)
            }
            Expr::Pow(b, e) => {
                write_at(f, b, 5)?;
                write!(f, "^")?;
                write_at(f, e, 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) if *x == 0.0 => b,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ => Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), _) if *x == 0.0 => neg(b),
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ => Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Bin(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl Expr {
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            e if !e.has_var() => e.eval::<f64>(&[]).ok(),
            _ => None,
        }
    }

    fn has_var(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_var(),
            Expr::Bin(_, a, b) | Expr::Pow(a, b) => a.has_var() || b.has_var(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(0.0)
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.diff(var)),
            Expr::Bin(op, l, r) => {
                let (dl, dr) = (l.diff(var), r.diff(var));
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                    BinOp::Div => {
                        let first = div(dl, (**r).clone());
                        let second = div(
                            mul((**l).clone(), dr),
                            Expr::Pow(r.clone(), Box::new(num(2.0))),
                        );
                        sub(first, second)
                    }
                }
            }
            Expr::Pow(b, e) => {
                let db = b.diff(var);
                if let Some(c) = e.constant_value() {
                    if db.is_zero() {
                        return num(0.0);
                    }
                    let lowered = if c - 1.0 == 1.0 {
                        (**b).clone()
                    } else {
                        Expr::Pow(b.clone(), Box::new(num(c - 1.0)))
                    };
                    return mul(mul(num(c), lowered), db);
                }
                let de = e.diff(var);
                // d(b^e) = b^e (e' ln b + e b'/b)
                let inner = add(
                    mul(de, call(Func::Ln, (**b).clone())),
                    div(mul((**e).clone(), db), (**b).clone()),
                );
                mul(self.clone(), inner)
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Tan => add(
                        num(1.0),
                        Expr::Pow(Box::new(call(Func::Tan, a)), Box::new(num(2.0))),
                    ),
                    Func::Exp => call(Func::Exp, a),
                    Func::Ln => return div(da, a),
                    Func::Sqrt => return div(da, mul(num(2.0), call(Func::Sqrt, a))),
                    Func::Sinh => call(Func::Cosh, a),
                    Func::Cosh => call(Func::Sinh, a),
                    Func::Atan => {
                        return div(
                            da,
                            add(num(1.0), Expr::Pow(Box::new(a), Box::new(num(2.0)))),
                        )
                    }
                };
                mul(outer, da)
            }
        }
    }

    /// Evaluates the expression at `x`, checking each node's domain at the
    /// base value of its argument.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        Ok(match self {
            Expr::Num(v) => S::from_f64(*v),
            Expr::Var(i) => x
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("coordinate x{i} not supplied")))?,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.base().norm() == 0.0 {
                            return Err(Error::Domain(format!("division by zero in `{self}`")));
                        }
                        a * b.recip()
                    }
                }
            }
            Expr::Pow(b, e) => {
                let base = b.eval(x)?;
                if let Some(c) = e.constant_value() {
                    if fm::fract(c) == 0.0 && c.abs() <= 64.0 {
                        if c < 0.0 && base.base().norm() == 0.0 {
                            return Err(Error::Domain(format!(
                                "zero to a negative power in `{self}`"
                            )));
                        }
                        return Ok(base.powi(c as i32));
                    }
                    check_positive(&base, self)?;
                    return Ok(base.powf(c));
                }
                check_positive(&base, self)?;
                let ex = e.eval(x)?;
                (ex * base.ln()).exp()
            }
            Expr::Call(f, a) => {
                let v = a.eval(x)?;
                let b = v.base();
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => {
                        if v.cos().base().norm() == 0.0 {
                            return Err(Error::Domain(format!("tan pole in `{self}`")));
                        }
                        v.tan()
                    }
                    Func::Exp => v.exp(),
                    Func::Ln => {
                        if b.norm() == 0.0 || (b.im == 0.0 && b.re < 0.0) {
                            return Err(Error::Domain(format!(
                                "ln of non-positive value in `{self}`"
                            )));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if b.im == 0.0 && b.re < 0.0 {
                            return Err(Error::Domain(format!(
                                "sqrt of negative value in `{self}`"
                            )));
                        }
                        v.sqrt()
                    }
                    Func::Sinh => v.sinh(),
                    Func::Cosh => v.cosh(),
                    Func::Atan => v.atan(),
                }
            }
        })
    }
}

fn check_positive<S: Scalar>(v: &S, e: &Expr) -> Result<()> {
    let b = v.base();
    if b.norm() == 0.0 || (b.im == 0.0 && b.re < 0.0) {
        return Err(Error::Domain(format!(
            "non-integer power of non-positive base in `{e}`"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{Jet, Layout};

    #[test]
    fn grammar_cases() {
        let e = parse_expression("sin(x0)^2", 2).unwrap();
        assert_eq!(
            e,
            Expr::Pow(
                Box::new(Expr::Call(Func::Sin, Box::new(Expr::Var(0)))),
                Box::new(Expr::Num(2.0))
            )
        );
        let e = parse_expression("-x0^2", 1).unwrap();
        assert!(matches!(e, Expr::Neg(_)));
        let e = parse_expression("2^3^2", 1).unwrap();
        assert_eq!(e.eval::<f64>(&[0.0]).unwrap(), 512.0);
        let e = parse_expression("8 / 2 / 2 - 1 - 1", 1).unwrap();
        assert_eq!(e.eval::<f64>(&[0.0]).unwrap(), 0.0);
        let e = parse_expression("2 * pi", 1).unwrap();
        assert!((e.eval::<f64>(&[0.0]).unwrap() - 2.0 * core::f64::consts::PI).abs() < 1e-15);
        let e = parse_expression("1.5e-1 * x0", 1).unwrap();
        assert!((e.eval(&[2.0]).unwrap() - 0.3f64).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse_expression("x0 + * 3", 2),
            Err(ParseError::Syntax {
                offset: 5,
                message: "unexpected `*`".into()
            })
        );
        assert_eq!(
            parse_expression("x2", 2),
            Err(ParseError::CoordinateOutOfRange { index: 2, dim: 2 })
        );
        assert!(matches!(
            parse_expression("foo(x0)", 2),
            Err(ParseError::UnknownSymbol { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("(x0", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse_expression("x0 x0", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "sin(x0)^2",
            "-(x0 - x1) * 3 / (x1 + 2)",
            "2^-x0",
            "(-x0)^2",
            "x0 - (x1 - 1)",
            "exp(-x0^2 / 2) * cosh(x1)",
            "cosh(pi * x0)^2",
            "-3 * -x1",
        ] {
            let a = parse_expression(src, 2).unwrap();
            let printed = alloc::format!("{a}");
            let b = parse_expression(&printed, 2).unwrap();
            assert_eq!(a, b, "{src} -> {printed}");
            assert_eq!(printed, alloc::format!("{b}"));
        }
    }

    #[test]
    fn symbolic_derivative_matches_jets() {
        let src = "sin(x0)^2 * exp(x1 / 3) + sqrt(2 + x0 * x1) - atan(x1)^3 + x0^x1 + tan(x0) * ln(1 + x1^2)";
        let e = parse_expression(src, 2).unwrap();
        let lay = Layout::new(2, 1);
        let p = [0.7, 0.4];
        let j = e.eval(&Jet::lift(&lay, &p)).unwrap();
        for v in 0..2 {
            let d = e.diff(v).eval(&p).unwrap();
            assert!((d - j.coeff(&if v == 0 { [1, 0] } else { [0, 1] })).abs() < 1e-13);
        }
    }

    #[test]
    fn domain_checks() {
        let e = parse_expression("ln(x0)", 1).unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(Error::Domain(_))));
        let e = parse_expression("1 / x0", 1).unwrap();
        assert!(e.eval(&[0.0]).is_err());
        let e = parse_expression("x0^0.5", 1).unwrap();
        assert!(e.eval(&[-2.0]).is_err());
        let e = parse_expression("x0^2", 1).unwrap();
        assert_eq!(e.eval(&[-2.0]).unwrap(), 4.0);
    }
}

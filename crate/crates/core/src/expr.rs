//! Scalar expression language for weights and nonlinearities.
//!
//! Expressions range over the variables `t`, `x`, `y` and `d`, where `d`
//! stands for the derivative of the component whose equation the expression
//! belongs to. The grammar is documented in `docs/expression-grammar.md`.
//!
//! ```
//! use sbvp::expr::{parse, Env};
//! let e = parse("1/(t*(1-t))*(1/y + 3*y^(1/3))").unwrap();
//! let v = e.eval(&Env::new().t(0.5).y(1.0)).unwrap();
//! assert_eq!(v, 16.0);
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    T,
    X,
    Y,
    D,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::T, Var::X, Var::Y, Var::D];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::D => "d",
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        match s {
            "t" => Some(Var::T),
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "d" => Some(Var::D),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
    Cbrt,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Min,
        Func::Max,
        Func::Pow,
        Func::Cbrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
            Func::Cbrt => "cbrt",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => " * ",
            BinOp::Div => " / ",
            BinOp::Pow => "^",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            BinOp::Pow => PREC_POW,
        }
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

/// Expression tree.
///
/// Negating a numeric literal yields a negative [`Expr::Const`] rather than
/// `Neg(Const)`, so `-2` and `-(2)` parse to the same tree. Use [`Expr::neg`]
/// when building trees by hand to keep that normal form.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parse failures. Offsets are 1-based byte columns, so an error at the end
/// of `"1/(t*(1-t)"` is reported at column 11.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("`{name}` expects {expected} argument(s), got {got} (offset {offset})")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        got: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Empty => 1,
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdent { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(Var),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("non-finite value {value} from `{expr}`")]
    NonFinite { expr: String, value: f64 },
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    vals: [Option<f64>; 4],
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, v: Var, val: f64) -> Self {
        self.vals[v.index()] = Some(val);
        self
    }

    pub fn t(self, v: f64) -> Self {
        self.with(Var::T, v)
    }

    pub fn x(self, v: f64) -> Self {
        self.with(Var::X, v)
    }

    pub fn y(self, v: f64) -> Self {
        self.with(Var::Y, v)
    }

    pub fn d(self, v: f64) -> Self {
        self.with(Var::D, v)
    }

    /// All four variables bound at once.
    pub fn full(t: f64, x: f64, y: f64, d: f64) -> Self {
        Self {
            vals: [Some(t), Some(x), Some(y), Some(d)],
        }
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        self.vals[v.index()]
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Negation in normal form: literals absorb the sign.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        debug_assert_eq!(args.len(), f.arity());
        Expr::Call(f, args)
    }

    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        self.eval_inner(env)
    }

    fn eval_inner(&self, env: &Env) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => return Ok(*c),
            Expr::Var(v) => return env.get(*v).ok_or(EvalError::Unbound(*v)),
            Expr::Neg(e) => -e.eval_inner(env)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval_inner(env)?;
                let b = r.eval_inner(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => self.checked_pow(a, b)?,
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval_inner(env)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(self.domain("log of a non-positive value"));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain("sqrt of a negative value"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Cbrt => a.cbrt(),
                    Func::Min => a.min(args[1].eval_inner(env)?),
                    Func::Max => a.max(args[1].eval_inner(env)?),
                    Func::Pow => {
                        let b = args[1].eval_inner(env)?;
                        self.checked_pow(a, b)?
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                expr: self.pretty(),
                value: v,
            })
        }
    }

    fn checked_pow(&self, a: f64, b: f64) -> Result<f64, EvalError> {
        if a == 0.0 && b < 0.0 {
            return Err(self.domain("zero raised to a negative power"));
        }
        if a < 0.0 && b.fract() != 0.0 {
            return Err(self.domain("negative base with a non-integer exponent"));
        }
        Ok(a.powf(b))
    }

    fn domain(&self, reason: &str) -> EvalError {
        EvalError::Domain {
            expr: self.pretty(),
            reason: reason.to_string(),
        }
    }

    /// Evaluates a one-variable expression with every variable bound to `z`.
    pub fn eval1(&self, z: f64) -> Result<f64, EvalError> {
        self.eval(&Env::full(z, z, z, z))
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Replaces every free variable by `with`; one-variable bounds such as
    /// `k(x)` are rebound onto the state they apply to this way.
    pub fn rebind(&self, with: &Expr) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(_) => with.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rebind(with))),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.rebind(with), r.rebind(with)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.rebind(with)).collect()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Bin(_, l, r) => 1 + l.depth().max(r.depth()),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => PREC_NEG,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Bin(op, ..) => op.prec(),
        }
    }

    /// Canonical text form; `parse(&e.pretty())` reproduces `e` exactly.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        self.write(&mut s);
        s
    }

    fn write_at(&self, min_prec: u8, out: &mut String) {
        if self.prec() < min_prec {
            out.push('(');
            self.write(out);
            out.push(')');
        } else {
            self.write(out);
        }
    }

    fn write(&self, out: &mut String) {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    out.push('-');
                }
                out.push_str(&format_number(c.abs()));
            }
            Expr::Var(v) => out.push_str(v.name()),
            Expr::Neg(e) => {
                out.push('-');
                // A bare literal after `-` would fold into a constant on reparse.
                let min = if matches!(**e, Expr::Const(_)) {
                    PREC_ATOM + 1
                } else {
                    PREC_NEG
                };
                e.write_at(min, out);
            }
            Expr::Bin(op, l, r) => {
                let (lp, rp) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_ADD, PREC_MUL),
                    BinOp::Mul | BinOp::Div => (PREC_MUL, PREC_NEG),
                    BinOp::Pow => (PREC_ATOM, PREC_NEG),
                };
                l.write_at(lp, out);
                out.push_str(op.symbol());
                r.write_at(rp, out);
            }
            Expr::Call(f, args) => {
                out.push_str(f.name());
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    a.write(out);
                }
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.pretty())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Shortest text that reads back to the same `f64`.
fn format_number(c: f64) -> String {
    if c != 0.0 && !(1e-5..1e16).contains(&c) {
        format!("{c:e}")
    } else {
        format!("{c}")
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(ParseError::Empty);
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    self.skip_ws();
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Const(v)),
            _ => Err(ParseError::Syntax {
                offset: start + 1,
                msg: format!("malformed number `{text}`"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(v) = Var::from_name(name) {
            return Ok(Expr::Var(v));
        }
        let Some(f) = Func::from_name(name) else {
            return Err(ParseError::UnknownIdent {
                offset: start + 1,
                name: name.to_string(),
            });
        };
        if !self.eat(b'(') {
            self.skip_ws();
            return Err(self.syntax(&format!("expected `(` after `{name}`")));
        }
        let mut args = Vec::new();
        if !self.eat(b')') {
            loop {
                args.push(self.expr()?);
                if self.eat(b',') {
                    continue;
                }
                if self.eat(b')') {
                    break;
                }
                self.skip_ws();
                return Err(self.syntax("expected `,` or `)`"));
            }
        }
        if args.len() != f.arity() {
            return Err(ParseError::Arity {
                offset: start + 1,
                name: name.to_string(),
                expected: f.arity(),
                got: args.len(),
            });
        }
        Ok(Expr::Call(f, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_nonlinearity() {
        let e = parse("1/(t*(1-t))*(1/y + 3*y^(1/3))").unwrap();
        assert_eq!(e.eval(&Env::new().t(0.5).y(1.0)).unwrap(), 16.0);
        assert_eq!(parse("t").unwrap(), Expr::Var(Var::T));
        assert_eq!(parse("t").unwrap().eval(&Env::new().t(0.3)).unwrap(), 0.3);
    }

    #[test]
    fn unbalanced_paren_offset() {
        let err = parse("1/(t*(1-t)").unwrap_err();
        assert_eq!(err.offset(), 11, "{err}");
    }

    #[test]
    fn identifier_and_arity_errors() {
        assert!(matches!(
            parse("x + w").unwrap_err(),
            ParseError::UnknownIdent { offset: 5, .. }
        ));
        assert!(matches!(
            parse("pow(x)").unwrap_err(),
            ParseError::Arity {
                expected: 2,
                got: 1,
                ..
            }
        ));
        assert!(matches!(parse("   ").unwrap_err(), ParseError::Empty));
        assert!(parse("2 x").is_err());
    }

    #[test]
    fn domain_errors() {
        let env = Env::new().t(0.5).y(0.0);
        assert!(matches!(
            parse("1/y").unwrap().eval(&env),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            parse("log(y)").unwrap().eval(&env),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            parse("y^(-0.5)").unwrap().eval(&env),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            parse("exp(1000)").unwrap().eval(&env),
            Err(EvalError::NonFinite { .. })
        ));
        assert_eq!(parse("x").unwrap().eval(&env), Err(EvalError::Unbound(Var::X)));
    }

    #[test]
    fn free_variables() {
        let vars = |s: &str| parse(s).unwrap().free_vars().into_iter().collect::<Vec<_>>();
        assert_eq!(vars("t"), vec![Var::T]);
        assert_eq!(vars("1/y + 3*y^(1/3)"), vec![Var::Y]);
        assert_eq!(vars("x^0.25 * y^0.75 * d^(-0.5)"), vec![Var::X, Var::Y, Var::D]);
    }

    #[test]
    fn pretty_forms() {
        assert_eq!(parse("1+2*3").unwrap().pretty(), "1 + 2 * 3");
        assert_eq!(parse("(1+2)*3").unwrap().pretty(), "(1 + 2) * 3");
        assert_eq!(Expr::Var(Var::T).pretty(), "t");
        assert_eq!(parse("(-2)^2").unwrap().pretty(), "(-2)^2");
        assert_eq!(parse("-2^2").unwrap().pretty(), "-2^2");
        assert_eq!(parse("-2^2").unwrap().eval(&Env::new()).unwrap(), -4.0);
        assert_eq!(parse("2^3^2").unwrap().eval(&Env::new()).unwrap(), 512.0);
        assert_eq!(parse("2^-1").unwrap().eval(&Env::new()).unwrap(), 0.5);
        assert_eq!(parse("min(1, max(2, 3))").unwrap().pretty(), "min(1, max(2, 3))");
        assert_eq!(parse("1e-12").unwrap(), Expr::Const(1e-12));
    }

    #[test]
    fn negated_literal_folds() {
        assert_eq!(parse("-(2)").unwrap(), Expr::Const(-2.0));
        assert_eq!(parse("--2").unwrap(), Expr::Const(2.0));
        let e = Expr::Neg(Box::new(Expr::Const(2.0)));
        assert_eq!(e.pretty(), "-(2)");
    }
}

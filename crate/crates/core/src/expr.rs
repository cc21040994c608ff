//! Expression language for coordinate functions, frame coefficients, metric
//! entries and warping functions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '-'? INTEGER)?
//! primary := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//! ```
//!
//! Function names: `cosh sinh cos sin exp ln sqrt`. Multiplication is always
//! explicit. Exponents are integer literals. Identifiers that are not
//! followed by `(` are variables; whether a variable is a coordinate or a
//! constant is decided by the bindings at evaluation time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::jet::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound variable `{name}`")]
    UnboundVariable { name: String },
    #[error("domain error: {op} at {value}")]
    Domain { op: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Cosh,
    Sinh,
    Cos,
    Sin,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "cos" => Func::Cos,
            "sin" => Func::Sin,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub const ALL: [Func; 7] =
        [Func::Cosh, Func::Sinh, Func::Cos, Func::Sin, Func::Exp, Func::Ln, Func::Sqrt];

    fn apply<S: Scalar>(self, x: &S) -> Result<S, ExprError> {
        let v = x.value();
        Ok(match self {
            Func::Cosh => x.chain(v.cosh(), v.sinh(), v.cosh()),
            Func::Sinh => x.chain(v.sinh(), v.cosh(), v.sinh()),
            Func::Cos => x.chain(v.cos(), -v.sin(), -v.cos()),
            Func::Sin => x.chain(v.sin(), v.cos(), -v.sin()),
            Func::Exp => {
                let e = v.exp();
                x.chain(e, e, e)
            }
            Func::Ln => {
                if v <= 0.0 {
                    return Err(ExprError::Domain { op: "ln", value: v });
                }
                x.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
            }
            Func::Sqrt => {
                if v < 0.0 || (v == 0.0 && S::ORDER > 0) {
                    return Err(ExprError::Domain { op: "sqrt", value: v });
                }
                let s = v.sqrt();
                x.chain(s, 0.5 / s, -0.25 / (s * v))
            }
        })
    }
}

/// Expression tree. Parsed literals are always non-negative; negation is
/// the [`Expr::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

/// Variable lookup for [`Expr::eval`].
pub trait Bindings<S> {
    fn lookup(&self, name: &str) -> Option<S>;
}

impl<S: Clone> Bindings<S> for HashMap<String, S> {
    fn lookup(&self, name: &str) -> Option<S> {
        self.get(name).cloned()
    }
}

impl<S: Clone> Bindings<S> for BTreeMap<String, S> {
    fn lookup(&self, name: &str) -> Option<S> {
        self.get(name).cloned()
    }
}

impl<S: Clone> Bindings<S> for [(&str, S)] {
    fn lookup(&self, name: &str) -> Option<S> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| v.clone())
    }
}

impl<S: Clone, const N: usize> Bindings<S> for [(&str, S); N] {
    fn lookup(&self, name: &str) -> Option<S> {
        self.as_slice().lookup(name)
    }
}

/// Coordinate variables bound positionally, with named real constants as a
/// fallback.
pub struct VarEnv<'a, S> {
    pub names: &'a [String],
    pub values: &'a [S],
    pub constants: &'a BTreeMap<String, f64>,
}

impl<S: Scalar> Bindings<S> for VarEnv<'_, S> {
    fn lookup(&self, name: &str) -> Option<S> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Some(self.values[i].clone());
        }
        self.constants.get(name).map(|&c| S::constant(c))
    }
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        parse(text)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    /// True when the expression contains no variables.
    pub fn is_constant(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn eval<S: Scalar, B: Bindings<S> + ?Sized>(&self, env: &B) -> Result<S, ExprError> {
        Ok(match self {
            Expr::Num(x) => S::constant(*x),
            Expr::Var(name) => env
                .lookup(name)
                .ok_or_else(|| ExprError::UnboundVariable { name: name.clone() })?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Call(f, a) => f.apply(&a.eval(env)?)?,
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Expr::Div(a, b) => {
                let num = a.eval(env)?;
                let den = b.eval(env)?;
                if den.value() == 0.0 {
                    return Err(ExprError::Domain { op: "division", value: 0.0 });
                }
                num / den
            }
            Expr::Pow(a, n) => powi(&a.eval(env)?, *n)?,
        })
    }

    /// Evaluates with `f64` bindings given as name/value pairs.
    pub fn eval_f64(&self, env: &[(&str, f64)]) -> Result<f64, ExprError> {
        self.eval(env)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Tree depth; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Pow(a, _) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(x) if x.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(x) => write!(f, "{x}")?,
            Expr::Var(n) => f.write_str(n)?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_at(f, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                b.write_at(f, 2)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                b.write_at(f, 3)?;
            }
            Expr::Pow(a, n) => {
                a.write_at(f, 5)?;
                write!(f, "^{n}")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn powi<S: Scalar>(x: &S, n: i32) -> Result<S, ExprError> {
    let v = x.value();
    match n {
        0 => Ok(S::constant(1.0)),
        1 => Ok(x.clone()),
        _ => {
            if n < 0 && v == 0.0 {
                return Err(ExprError::Domain { op: "negative power", value: v });
            }
            let nf = n as f64;
            Ok(x.chain(v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2)))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => parse(&t).map_err(serde::de::Error::custom),
            Raw::Number(x) if x < 0.0 => Ok(Expr::Neg(Box::new(Expr::Num(-x)))),
            Raw::Number(x) => Ok(Expr::Num(x)),
        }
    }
}

/// Parses `text` into an expression tree.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, expected: expected.to_string() }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let negative = self.eat('-');
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek_raw(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("integer exponent"));
        }
        let mag: i32 = self.src[start..self.pos].parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: "integer exponent within i32 range".to_string(),
        })?;
        Ok(Expr::Pow(Box::new(base), if negative { -mag } else { mag }))
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("`)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while matches!(self.peek_raw(), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.pos += self.peek_raw().map_or(1, char::len_utf8);
                }
                let name = &self.src[start..self.pos];
                if self.peek() == Some('(') {
                    let func = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
                        name: name.to_string(),
                        offset: start,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("`)`"));
                    }
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name.to_string()))
                }
            }
            _ => Err(self.error("number, name or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - s
        };
        let mut p = self.pos;
        let mut n = digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            n += digits(&mut p);
        }
        if n == 0 {
            return Err(self.error("digits"));
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) > 0 {
                p = q;
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax { offset: start, expected: "number".to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet1, Jet2};

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn parses_immersion_component() {
        let e = parse("v*cosh(alpha)").unwrap();
        assert_eq!(e, Expr::Mul(b(Expr::var("v")), b(Expr::Call(Func::Cosh, b(Expr::var("alpha"))))));
    }

    #[test]
    fn parses_zero_literal() {
        assert_eq!(parse("0").unwrap(), Expr::Num(0.0));
    }

    #[test]
    fn division_is_left_associative_with_multiplication() {
        let e = parse("u/sqrt(2)*sinh(alpha)").unwrap();
        let expected = Expr::Mul(
            b(Expr::Div(b(Expr::var("u")), b(Expr::Call(Func::Sqrt, b(Expr::Num(2.0)))))),
            b(Expr::Call(Func::Sinh, b(Expr::var("alpha")))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn power_binds_tighter_than_negation() {
        assert_eq!(parse("-a^2").unwrap(), Expr::Neg(b(Expr::Pow(b(Expr::var("a")), 2))));
        assert_eq!(parse("a^-1").unwrap(), Expr::Pow(b(Expr::var("a")), -1));
        assert_eq!(parse("2*-x").unwrap(), Expr::Mul(b(Expr::Num(2.0)), b(Expr::Neg(b(Expr::var("x"))))));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("v*(alpha + ").unwrap_err() {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 11),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(parse("2 3"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x^y"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x^2.5"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn unknown_function_is_reported() {
        assert_eq!(
            parse("1 + tanh(x)").unwrap_err(),
            ExprError::UnknownFunction { name: "tanh".into(), offset: 4 }
        );
    }

    #[test]
    fn evaluates_in_plain_scalars() {
        let e = parse("v*cosh(alpha)").unwrap();
        assert_eq!(e.eval_f64(&[("v", 2.0), ("alpha", 0.0)]).unwrap(), 2.0);
        let id = parse("cosh(a)^2 - sinh(a)^2").unwrap();
        assert!((id.eval_f64(&[("a", 0.7)]).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn first_order_jet_gives_partial_derivative() {
        let e = parse("v*cosh(alpha)").unwrap();
        let env = [("v", Jet1::variable(3.0, 0, 2)), ("alpha", Jet1::variable(1.0, 1, 2))];
        let r: Jet1 = e.eval(&env).unwrap();
        assert!((r.d(0) - 1f64.cosh()).abs() < 1e-15);
        assert!((r.d(1) - 3.0 * 1f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn second_order_mixed_partial() {
        let e = parse("v*cosh(alpha)").unwrap();
        let env = [("v", Jet2::variable(1.3, 0, 2)), ("alpha", Jet2::variable(0.4, 1, 2))];
        let r: Jet2 = e.eval(&env).unwrap();
        assert!((r.dd(0, 1) - 0.4f64.sinh()).abs() < 1e-15);
        assert_eq!(r.dd(0, 0), 0.0);
    }

    #[test]
    fn unbound_and_domain_errors() {
        let e = parse("x + y").unwrap();
        assert_eq!(
            e.eval_f64(&[("x", 1.0)]).unwrap_err(),
            ExprError::UnboundVariable { name: "y".into() }
        );
        assert!(matches!(parse("ln(x)").unwrap().eval_f64(&[("x", 0.0)]), Err(ExprError::Domain { .. })));
        assert!(matches!(parse("sqrt(x)").unwrap().eval_f64(&[("x", -1.0)]), Err(ExprError::Domain { .. })));
        assert_eq!(parse("sqrt(x)").unwrap().eval_f64(&[("x", 0.0)]).unwrap(), 0.0);
        let env = [("x", Jet1::variable(0.0, 0, 1))];
        assert!(matches!(parse("sqrt(x)").unwrap().eval::<Jet1, _>(&env), Err(ExprError::Domain { .. })));
        assert!(matches!(parse("1/x").unwrap().eval_f64(&[("x", 0.0)]), Err(ExprError::Domain { .. })));
        assert!(matches!(parse("x^-2").unwrap().eval_f64(&[("x", 0.0)]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn free_variables() {
        let names = |s: &str| parse(s).unwrap().free_vars().into_iter().collect::<Vec<_>>();
        assert_eq!(names("v*cosh(alpha)"), vec!["alpha", "v"]);
        assert!(names("3.5").is_empty());
        assert_eq!(names("u + v"), vec!["u", "v"]);
    }

    #[test]
    fn printing_reparses() {
        for s in [
            "v*cosh(alpha)",
            "u/sqrt(2)*sinh(alpha)",
            "-(a + b)^2",
            "a - (b - c)",
            "a/(b*c)",
            "--x",
            "a - -b",
            "(-x)^3",
            "exp(ln(x))^-2",
            "0.1 + 1e-7",
        ] {
            let e = parse(s).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{s} printed as {printed}");
        }
    }

    #[test]
    fn serde_accepts_strings_and_numbers() {
        let e: Expr = serde_json::from_str("\"k1\"").unwrap();
        assert_eq!(e, Expr::var("k1"));
        let e: Expr = serde_json::from_str("-2.5").unwrap();
        assert_eq!(e.eval_f64(&[]).unwrap(), -2.5);
        assert_eq!(serde_json::to_string(&parse("a*b").unwrap()).unwrap(), "\"a*b\"");
    }
}

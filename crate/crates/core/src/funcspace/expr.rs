//! Scalar expressions in one variable `s`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := sum (("<" | "<=" | ">" | ">=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" unary)?
//! primary := number | "s" | "pi" | "e" | name "(" args ")" | "(" expr ")"
//! ```
//!
//! Functions: `exp log sqrt sin cos abs` (one argument), `max min` (two) and
//! `piecewise(c1, v1, c2, v2, ..., default)`, which returns the first `v_i`
//! whose condition is nonzero. Comparisons evaluate to 1 or 0.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Max,
    Min,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "max" => Func::Max,
            "min" => Func::Min,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Max => "max",
            Func::Min => "min",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Max | Func::Min => 2,
            _ => 1,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Piecewise(Vec<(Expr, Expr)>, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown function `{name}` at position {position}")]
    UnknownFunction { position: usize, name: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("`{name}` expects {expected} argument(s), got {got} (position {position})")]
    Arity {
        position: usize,
        name: String,
        expected: String,
        got: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownFunction { position, .. }
            | ParseError::UnknownIdentifier { position, .. }
            | ParseError::Arity { position, .. } => *position,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("evaluation of `{op}` produced {value} at s = {s}")]
pub struct EvalError {
    pub op: &'static str,
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
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
    fn tokens(text: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => return self.number(start),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                return Ok((Tok::Ident(name.to_string()), start));
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'+' => Tok::Op("+"),
            b'-' => Tok::Op("-"),
            b'*' => Tok::Op("*"),
            b'/' => Tok::Op("/"),
            b'^' => Tok::Op("^"),
            b'<' | b'>' => {
                let eq = self.src.get(self.pos + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'<', true) => "<=",
                    (b'<', false) => "<",
                    (_, true) => ">=",
                    (_, false) => ">",
                };
                self.pos += if eq { 2 } else { 1 };
                return Ok((Tok::Op(op), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("unexpected character `{}`", c as char),
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let s = self.src;
        let digits = |p: &mut usize| {
            let from = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - from
        };
        let mut p = self.pos;
        let mut n = digits(&mut p);
        if p < s.len() && s[p] == b'.' {
            p += 1;
            n += digits(&mut p);
        }
        if n == 0 {
            return Err(ParseError::Syntax {
                position: start,
                message: "malformed number".into(),
            });
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) > 0 {
                p = q;
            }
        }
        let text = std::str::from_utf8(&s[start..p]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax {
                position: start,
                message: format!("number `{text}` out of range"),
            });
        }
        self.pos = p;
        Ok((Tok::Num(value), start))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn at(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(n) => format!("`{n}`"),
            Tok::Op(o) => format!("`{o}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
        };
        ParseError::Syntax {
            position: self.at(),
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.sum()?;
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op("-") => {
                self.bump();
                let inner = self.unary()?;
                Ok(match inner {
                    Expr::Const(c) => Expr::Const(-c),
                    other => Expr::Neg(Box::new(other)),
                })
            }
            Tok::Op("+") => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Tok::Op("^") = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.at();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.args()?;
                    return Self::call(&name, args, at);
                }
                match name.as_str() {
                    "s" => Ok(Expr::Var),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => Ok(Expr::Const(std::f64::consts::E)),
                    _ => Err(ParseError::UnknownIdentifier { position: at, name }),
                }
            }
            _ => Err(self.unexpected("a number, `s`, a function call or `(`")),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.unexpected("`,` or `)`")),
            }
        }
    }

    fn call(name: &str, mut args: Vec<Expr>, at: usize) -> Result<Expr, ParseError> {
        if name == "piecewise" {
            if args.len() < 3 || args.len() % 2 == 0 {
                return Err(ParseError::Arity {
                    position: at,
                    name: name.into(),
                    expected: "an odd number (at least 3) of".into(),
                    got: args.len(),
                });
            }
            let default = args.pop().unwrap();
            let mut branches = Vec::with_capacity(args.len() / 2);
            let mut it = args.into_iter();
            while let (Some(c), Some(v)) = (it.next(), it.next()) {
                branches.push((c, v));
            }
            return Ok(Expr::Piecewise(branches, Box::new(default)));
        }
        let Some(func) = Func::from_name(name) else {
            return Err(ParseError::UnknownFunction {
                position: at,
                name: name.into(),
            });
        };
        if args.len() != func.arity() {
            return Err(ParseError::Arity {
                position: at,
                name: name.into(),
                expected: func.arity().to_string(),
                got: args.len(),
            });
        }
        Ok(Expr::Call(func, args))
    }
}

/// Parse an expression in the variable `s`.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, i: 0 };
    if *p.peek() == Tok::End {
        return Err(ParseError::Syntax {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

fn checked(op: &'static str, s: f64, value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError { op, s, value })
    }
}

impl Expr {
    /// Evaluate at `s`. Any non-finite intermediate is an error.
    pub fn eval(&self, s: f64) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var => checked("s", s, s),
            Expr::Neg(e) => Ok(-e.eval(s)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval(s)?;
                let b = r.eval(s)?;
                let (name, v) = match op {
                    BinOp::Add => ("+", a + b),
                    BinOp::Sub => ("-", a - b),
                    BinOp::Mul => ("*", a * b),
                    BinOp::Div => ("/", a / b),
                    BinOp::Pow => ("^", pow(a, b)),
                };
                checked(name, s, v)
            }
            Expr::Compare(op, l, r) => {
                let a = l.eval(s)?;
                let b = r.eval(s)?;
                let t = match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                };
                Ok(if t { 1.0 } else { 0.0 })
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(s)?;
                let v = match f {
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Abs => x.abs(),
                    Func::Max => x.max(args[1].eval(s)?),
                    Func::Min => x.min(args[1].eval(s)?),
                };
                checked(f.name(), s, v)
            }
            Expr::Piecewise(branches, default) => {
                for (c, v) in branches {
                    if c.eval(s)? != 0.0 {
                        return v.eval(s);
                    }
                }
                default.eval(s)
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Neg(e) => 1 + e.size(),
            Expr::Binary(_, l, r) | Expr::Compare(_, l, r) => 1 + l.size() + r.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
            Expr::Piecewise(b, d) => {
                1 + d.size() + b.iter().map(|(c, v)| c.size() + v.size()).sum::<usize>()
            }
        }
    }
}

// Integer exponents go through powi so that (negative)^(integer) stays real.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var => write!(f, "s"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Compare(op, l, r) => {
                let sym = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::Piecewise(branches, default) => {
                write!(f, "piecewise(")?;
                for (c, v) in branches {
                    write!(f, "{c}, {v}, ")?;
                }
                write!(f, "{default})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cubic_product_tree() {
        let e = parse_expression("(s-1)*(2-s)*s").unwrap();
        match &e {
            Expr::Binary(BinOp::Mul, l, r) => {
                assert_eq!(**r, Expr::Var);
                assert!(matches!(**l, Expr::Binary(BinOp::Mul, _, _)));
            }
            other => panic!("unexpected tree {other:?}"),
        }
        assert_eq!(e.eval(1.5).unwrap(), 0.5 * 0.5 * 1.5);
    }

    #[test]
    fn exp_of_rational_polynomial() {
        let e = parse_expression("exp(-s^2/2)").unwrap();
        assert!(matches!(e, Expr::Call(Func::Exp, _)));
        assert!((e.eval(1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-16);
        // unary minus binds looser than ^
        assert_eq!(parse_expression("-2^2").unwrap().eval(0.0).unwrap(), -4.0);
        assert_eq!(parse_expression("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
    }

    #[test]
    fn dangling_operator_reports_position() {
        let err = parse_expression("s +").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert_eq!(err.position(), 3);
    }

    #[test]
    fn rejects_unknowns_and_bad_arity() {
        assert!(matches!(
            parse_expression("foo(s)"),
            Err(ParseError::UnknownFunction { position: 0, .. })
        ));
        assert!(matches!(
            parse_expression("2*x"),
            Err(ParseError::UnknownIdentifier { position: 2, .. })
        ));
        assert!(matches!(
            parse_expression("max(s)"),
            Err(ParseError::Arity { got: 1, .. })
        ));
        assert!(matches!(
            parse_expression("piecewise(s < 1, 2)"),
            Err(ParseError::Arity { got: 2, .. })
        ));
        assert!(parse_expression("").is_err());
        assert!(parse_expression("(s").is_err());
        assert!(parse_expression("1e999").is_err());
    }

    #[test]
    fn piecewise_selects_first_true_branch() {
        let e = parse_expression("piecewise(s < 1, 0, s < 2, s - 1, 1)").unwrap();
        assert_eq!(e.eval(0.5).unwrap(), 0.0);
        assert_eq!(e.eval(1.5).unwrap(), 0.5);
        assert_eq!(e.eval(3.0).unwrap(), 1.0);
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(parse_expression("log(s)").unwrap().eval(-1.0).is_err());
        assert!(parse_expression("1/s").unwrap().eval(0.0).is_err());
        assert!(parse_expression("(s-2)^0.5").unwrap().eval(1.0).is_err());
        assert_eq!(parse_expression("(s-2)^2").unwrap().eval(1.0).unwrap(), 1.0);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1e3f64..1e3).prop_map(Expr::Const),
            Just(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Expr::Compare(CmpOp::Le, Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expr::Call(Func::Exp, vec![e])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
                (inner.clone(), inner.clone(), inner)
                    .prop_map(|(c, v, d)| Expr::Piecewise(vec![(c, v)], Box::new(d))),
            ]
        })
    }

    // Neg(Const) is folded by the parser, so normalize generated trees the same way.
    fn canonical(e: Expr) -> Expr {
        match e {
            Expr::Neg(inner) => match canonical(*inner) {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            },
            Expr::Binary(op, l, r) => {
                Expr::Binary(op, Box::new(canonical(*l)), Box::new(canonical(*r)))
            }
            Expr::Compare(op, l, r) => {
                Expr::Compare(op, Box::new(canonical(*l)), Box::new(canonical(*r)))
            }
            Expr::Call(f, args) => Expr::Call(f, args.into_iter().map(canonical).collect()),
            Expr::Piecewise(b, d) => Expr::Piecewise(
                b.into_iter().map(|(c, v)| (canonical(c), canonical(v))).collect(),
                Box::new(canonical(*d)),
            ),
            other => other,
        }
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let e = canonical(e);
            let printed = e.to_string();
            let back = parse_expression(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), printed);
        }
    }
}

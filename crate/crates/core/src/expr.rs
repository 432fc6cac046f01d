//! Closed-form expressions in one index variable.
//!
//! Grammar (one parser for weight sequences and sequence families):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := postfix ('^' unary)?          right associative
//! postfix := atom '!'*
//! atom    := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers resolve to the index variable, then to named parameters, then
//! to the constants `e` and `pi`. Functions: `log` (natural), `ln`, `exp`, `sqrt`.
//!
//! Expressions can be evaluated directly in `f64` or in log space
//! ([`Expr::eval_ln`]), which is how weight sequences such as `p!^3` are
//! evaluated far past the point where `f64` overflows.

use std::collections::BTreeMap;
use std::fmt;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Log,
    Exp,
    Sqrt,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Fact(Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

/// Variable bindings for evaluation.
#[derive(Clone, Debug, Default)]
pub struct Env<'a> {
    pub var: &'a str,
    pub value: f64,
    pub params: Option<&'a BTreeMap<String, f64>>,
}

impl<'a> Env<'a> {
    pub fn new(var: &'a str, value: f64) -> Self {
        Env { var, value, params: None }
    }

    pub fn with_params(mut self, params: &'a BTreeMap<String, f64>) -> Self {
        self.params = Some(params);
        self
    }

    fn lookup(&self, name: &str) -> Result<f64> {
        if name == self.var {
            return Ok(self.value);
        }
        if let Some(v) = self.params.and_then(|p| p.get(name)) {
            return Ok(*v);
        }
        match name {
            "e" => Ok(std::f64::consts::E),
            "pi" => Ok(std::f64::consts::PI),
            _ => Err(Error::Expression(format!("unbound identifier `{name}`"))),
        }
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input in `{source}` at token {}",
                parser.pos
            )));
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Identifiers used by the expression, excluding function names.
    pub fn identifiers(&self) -> Vec<String> {
        fn walk(n: &Node, out: &mut Vec<String>) {
            match n {
                Node::Num(_) => {}
                Node::Var(v) => {
                    if !out.contains(v) {
                        out.push(v.clone())
                    }
                }
                Node::Neg(a) | Node::Fact(a) | Node::Call(_, a) => walk(a, out),
                Node::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<f64> {
        let v = eval_plain(&self.root, env)?;
        if v.is_nan() {
            return Err(Error::Expression(format!("`{}` evaluated to NaN", self.source)));
        }
        Ok(v)
    }

    /// Evaluate in log space, returning `(sign, ln|value|)`.
    pub fn eval_ln(&self, env: &Env<'_>) -> Result<(f64, f64)> {
        let v = eval_log(&self.root, env)?;
        if v.ln.is_nan() {
            return Err(Error::Expression(format!("`{}` evaluated to NaN", self.source)));
        }
        Ok((v.sign, v.ln))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // scientific notation: 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Expression(format!("bad number literal `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^!".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c == '−' {
            out.push(Tok::Op('-'));
            i += 1;
        } else if c == '(' {
            out.push(Tok::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Tok::RParen);
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` in `{s}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Node::Bin(BinOp::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Node::Bin(BinOp::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Node::Bin(BinOp::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Node::Bin(BinOp::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat_op('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.postfix()?;
        if self.eat_op('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Node> {
        let mut node = self.atom()?;
        while self.eat_op('!') {
            node = Node::Fact(Box::new(node));
        }
        Ok(node)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    let func = match name.as_str() {
                        "log" | "ln" => Func::Log,
                        "exp" => Func::Exp,
                        "sqrt" => Func::Sqrt,
                        _ => return Err(Error::Expression(format!("unknown function `{name}`"))),
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Node::Call(func, Box::new(arg)))
                } else {
                    Ok(Node::Var(name))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression("missing `)`".into()))
        }
    }
}

fn factorial(x: f64) -> Result<f64> {
    if x < 0.0 && x.fract() == 0.0 {
        return Err(Error::Expression(format!("factorial of negative integer {x}")));
    }
    if x.fract() == 0.0 && x <= 170.0 {
        let mut acc = 1.0;
        let mut k = 2.0;
        while k <= x {
            acc *= k;
            k += 1.0;
        }
        return Ok(acc);
    }
    if x <= -1.0 {
        return Err(Error::Expression(format!("factorial undefined at {x}")));
    }
    Ok(ln_gamma(x + 1.0).exp())
}

fn eval_plain(n: &Node, env: &Env<'_>) -> Result<f64> {
    Ok(match n {
        Node::Num(v) => *v,
        Node::Var(name) => env.lookup(name)?,
        Node::Neg(a) => -eval_plain(a, env)?,
        Node::Fact(a) => factorial(eval_plain(a, env)?)?,
        Node::Call(f, a) => {
            let x = eval_plain(a, env)?;
            match f {
                Func::Log => {
                    if x <= 0.0 {
                        return Err(Error::Expression(format!("log of non-positive value {x}")));
                    }
                    x.ln()
                }
                Func::Exp => x.exp(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(Error::Expression(format!("sqrt of negative value {x}")));
                    }
                    x.sqrt()
                }
            }
        }
        Node::Bin(op, a, b) => {
            let x = eval_plain(a, env)?;
            let y = eval_plain(b, env)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(Error::Expression("division by zero".into()));
                    }
                    x / y
                }
                BinOp::Pow => {
                    if x < 0.0 && y.fract() != 0.0 {
                        return Err(Error::Expression(format!(
                            "negative base {x} with non-integer exponent {y}"
                        )));
                    }
                    x.powf(y)
                }
            }
        }
    })
}

/// Signed value stored as `sign * exp(ln)`; `sign == 0` encodes zero.
#[derive(Clone, Copy, Debug)]
struct SLog {
    sign: f64,
    ln: f64,
}

impl SLog {
    const ZERO: SLog = SLog { sign: 0.0, ln: f64::NEG_INFINITY };

    fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            SLog { sign: v.signum(), ln: v.abs().ln() }
        }
    }

    fn to_f64(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln.exp()
        }
    }

    fn add(self, o: SLog) -> SLog {
        if self.sign == 0.0 {
            return o;
        }
        if o.sign == 0.0 {
            return self;
        }
        let (big, small) = if self.ln >= o.ln { (self, o) } else { (o, self) };
        let d = (small.ln - big.ln).exp();
        if big.sign == small.sign {
            SLog { sign: big.sign, ln: big.ln + d.ln_1p() }
        } else if d == 1.0 {
            Self::ZERO
        } else {
            SLog { sign: big.sign, ln: big.ln + (-d).ln_1p() }
        }
    }
}

fn eval_log(n: &Node, env: &Env<'_>) -> Result<SLog> {
    Ok(match n {
        Node::Num(v) => SLog::from_f64(*v),
        Node::Var(name) => SLog::from_f64(env.lookup(name)?),
        Node::Neg(a) => {
            let v = eval_log(a, env)?;
            SLog { sign: -v.sign, ln: v.ln }
        }
        Node::Fact(a) => {
            let x = eval_log(a, env)?.to_f64();
            if x < 0.0 && x.fract() == 0.0 || x <= -1.0 {
                return Err(Error::Expression(format!("factorial undefined at {x}")));
            }
            if x.fract() == 0.0 && x <= 20.0 {
                SLog::from_f64(factorial(x)?)
            } else {
                SLog { sign: 1.0, ln: ln_gamma(x + 1.0) }
            }
        }
        Node::Call(f, a) => {
            let v = eval_log(a, env)?;
            match f {
                Func::Log => {
                    if v.sign <= 0.0 {
                        return Err(Error::Expression("log of non-positive value".into()));
                    }
                    SLog::from_f64(v.ln)
                }
                Func::Exp => SLog { sign: 1.0, ln: v.to_f64() },
                Func::Sqrt => {
                    if v.sign < 0.0 {
                        return Err(Error::Expression("sqrt of negative value".into()));
                    }
                    if v.sign == 0.0 {
                        SLog::ZERO
                    } else {
                        SLog { sign: 1.0, ln: v.ln / 2.0 }
                    }
                }
            }
        }
        Node::Bin(op, a, b) => {
            let x = eval_log(a, env)?;
            let y = eval_log(b, env)?;
            match op {
                BinOp::Add => x.add(y),
                BinOp::Sub => x.add(SLog { sign: -y.sign, ln: y.ln }),
                BinOp::Mul => {
                    if x.sign == 0.0 || y.sign == 0.0 {
                        SLog::ZERO
                    } else {
                        SLog { sign: x.sign * y.sign, ln: x.ln + y.ln }
                    }
                }
                BinOp::Div => {
                    if y.sign == 0.0 {
                        return Err(Error::Expression("division by zero".into()));
                    }
                    if x.sign == 0.0 {
                        SLog::ZERO
                    } else {
                        SLog { sign: x.sign * y.sign, ln: x.ln - y.ln }
                    }
                }
                BinOp::Pow => {
                    let e = y.to_f64();
                    if !e.is_finite() {
                        return Err(Error::Expression("non-finite exponent".into()));
                    }
                    if x.sign == 0.0 {
                        if e > 0.0 {
                            SLog::ZERO
                        } else if e == 0.0 {
                            SLog::from_f64(1.0)
                        } else {
                            return Err(Error::Expression("zero to a negative power".into()));
                        }
                    } else if x.sign < 0.0 {
                        if e.fract() != 0.0 {
                            return Err(Error::Expression(
                                "negative base with non-integer exponent".into(),
                            ));
                        }
                        let sign = if (e as i64) % 2 == 0 { 1.0 } else { -1.0 };
                        SLog { sign, ln: x.ln * e }
                    } else {
                        SLog { sign: 1.0, ln: x.ln * e }
                    }
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, var: &str, v: f64) -> f64 {
        Expr::parse(src).unwrap().eval(&Env::new(var, v)).unwrap()
    }

    #[test]
    fn precedence_and_postfix() {
        assert_eq!(ev("p!^2", "p", 3.0), 36.0);
        assert_eq!(ev("p!^2 * 2^p", "p", 3.0), 288.0);
        assert_eq!(ev("-2^2", "p", 0.0), -4.0);
        assert_eq!(ev("2^3^2", "p", 0.0), 512.0);
        assert_eq!(ev("(1+2)*3 - 4/2", "p", 0.0), 7.0);
        assert_eq!(ev("2 ^ -1", "p", 0.0), 0.5);
        assert!((ev("log(e+j)", "j", 0.0) - 1.0).abs() < 1e-15);
        assert!((ev("1e-3 * j", "j", 2.0) - 2e-3).abs() < 1e-18);
    }

    #[test]
    fn params_resolve() {
        let mut params = BTreeMap::new();
        params.insert("r".to_string(), 2.0);
        let e = Expr::parse("(1/log(e+j))^(r-1)").unwrap();
        let v = e.eval(&Env::new("j", 10.0).with_params(&params)).unwrap();
        assert!((v - 1.0 / (std::f64::consts::E + 10.0).ln()).abs() < 1e-15);
        assert!(e.eval(&Env::new("j", 10.0)).is_err());
    }

    #[test]
    fn log_domain_matches_plain_and_survives_overflow() {
        let e = Expr::parse("p!^2 * 2^p").unwrap();
        for p in [0.0, 1.0, 5.0, 30.0] {
            let (s, ln) = e.eval_ln(&Env::new("p", p)).unwrap();
            let plain = e.eval(&Env::new("p", p)).unwrap();
            assert_eq!(s, 1.0);
            assert!((ln - plain.ln()).abs() < 1e-12 * (1.0 + plain.ln().abs()));
        }
        let (_, ln) = e.eval_ln(&Env::new("p", 400.0)).unwrap();
        let expect = 2.0 * ln_gamma(401.0) + 400.0 * 2f64.ln();
        assert!((ln - expect).abs() < 1e-9 * expect);
        assert!(e.eval(&Env::new("p", 400.0)).unwrap().is_infinite());
    }

    #[test]
    fn log_domain_subtraction() {
        let e = Expr::parse("exp(1000) - exp(999)").unwrap();
        let (s, ln) = e.eval_ln(&Env::new("p", 0.0)).unwrap();
        assert_eq!(s, 1.0);
        let expect = 1000.0 + (1.0 - (-1f64).exp()).ln();
        assert!((ln - expect).abs() < 1e-12);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("p +").is_err());
        assert!(Expr::parse("foo(p)").is_err());
        assert!(Expr::parse("(p").is_err());
        assert!(Expr::parse("p $ 2").is_err());
    }
}

//! A small arithmetic expression language for user-supplied coefficients.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | variable | "pi" | func "(" expr ")" | "(" expr ")" ;
//! func    = "exp" | "sin" | "cos" | "tanh" | "abs" ;
//! variable = "x" | "y" | "z" | "g1" | "g2" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
    G1,
    G2,
}

impl Var {
    fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::G1 => "g1",
            Var::G2 => "g2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src, pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self { source: src.to_string(), root })
    }

    /// Parses and rejects variables outside `allowed`.
    pub fn parse_with(src: &str, allowed: &[Var]) -> Result<Self> {
        let e = Self::parse(src)?;
        let mut used = Vec::new();
        collect_vars(&e.root, &mut used);
        if let Some(v) = used.iter().find(|v| !allowed.contains(v)) {
            let names: Vec<_> = allowed.iter().map(|v| v.name()).collect();
            return Err(Error::Expression {
                offset: src.find(v.name()).unwrap_or(0),
                message: format!("variable `{}` not allowed here (allowed: {})", v.name(), names.join(", ")),
            });
        }
        Ok(e)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with variable values in the order `x, y, z, g1, g2`.
    pub fn eval(&self, vars: &[f64; 5]) -> f64 {
        eval(&self.root, vars)
    }

    pub fn eval_xyz(&self, x: f64, y: f64, z: f64) -> f64 {
        self.eval(&[x, y, z, 0.0, 0.0])
    }

    pub fn eval_g(&self, g1: f64, g2: f64) -> f64 {
        self.eval(&[0.0, 0.0, 0.0, g1, g2])
    }
}

fn collect_vars(n: &Node, out: &mut Vec<Var>) {
    match n {
        Node::Num(_) => {}
        Node::Var(v) => out.push(*v),
        Node::Neg(a) | Node::Call(_, a) => collect_vars(a, out),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
    }
}

fn eval(n: &Node, v: &[f64; 5]) -> f64 {
    match n {
        Node::Num(x) => *x,
        Node::Var(var) => v[var.slot()],
        Node::Neg(a) => -eval(a, v),
        Node::Add(a, b) => eval(a, v) + eval(b, v),
        Node::Sub(a, b) => eval(a, v) - eval(b, v),
        Node::Mul(a, b) => eval(a, v) * eval(b, v),
        Node::Div(a, b) => eval(a, v) / eval(b, v),
        Node::Pow(a, b) => {
            let base = eval(a, v);
            match b.as_ref() {
                Node::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(*e as i32),
                _ => base.powf(eval(b, v)),
            }
        }
        Node::Call(f, a) => {
            let x = eval(a, v);
            match f {
                Func::Exp => x.exp(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tanh => x.tanh(),
                Func::Abs => x.abs(),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Expression { offset: self.pos, message: msg.into() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let ident = &self.src[start..self.pos];
                let func = match ident {
                    "exp" => Some(Func::Exp),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tanh" => Some(Func::Tanh),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat('(') {
                        return Err(self.error(format!("expected `(` after `{ident}`")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected `)`"));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match ident {
                    "x" => Ok(Node::Var(Var::X)),
                    "y" => Ok(Node::Var(Var::Y)),
                    "z" => Ok(Node::Var(Var::Z)),
                    "g1" => Ok(Node::Var(Var::G1)),
                    "g2" => Ok(Node::Var(Var::G2)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => {
                        self.pos = start;
                        Err(self.error(format!("unknown identifier `{ident}`")))
                    }
                }
            }
            Some(c) => Err(self.error(format!("unexpected character `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        let mut p = self.pos;
        digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            digits(&mut p);
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if q < bytes.len() && bytes[q].is_ascii_digit() {
                digits(&mut q);
                p = q;
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Expression { offset: start, message: "malformed number".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64, z: f64) -> f64 {
        Expr::parse(s).unwrap().eval_xyz(x, y, z)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("-x^2", 3.0, 0.0, 0.0), -9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("2.5e-1 * y", 0.0, 4.0, 0.0), 1.0);
    }

    #[test]
    fn functions_and_variables() {
        let x = 0.3;
        assert!((ev("exp(-x) + x*y", x, 2.0, 0.0) - ((-x).exp() + 0.6)).abs() < 1e-15);
        assert_eq!(ev("abs(y) * tanh(z)", 0.0, -2.0, 0.0), 0.0);
        assert!((ev("sin(pi/2) + cos(0)", 0.0, 0.0, 0.0) - 2.0).abs() < 1e-15);
        let rho = Expr::parse("3*(g2 - g1)").unwrap();
        assert_eq!(rho.eval_g(1.0, 2.0), 3.0);
    }

    #[test]
    fn errors_carry_offsets() {
        match Expr::parse("1 + foo(x)") {
            Err(Error::Expression { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse_with("x*g1", &[Var::X, Var::Y]).is_err());
        assert!(Expr::parse_with("x*y", &[Var::X, Var::Y]).is_ok());
    }
}

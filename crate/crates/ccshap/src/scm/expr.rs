//! Expression trees for mechanism assignment functions, with a small text
//! grammar: real literals, parent references, the `noise` keyword, the
//! binary operators `+ - * /`, unary minus, and the functions `square`,
//! `exp`, `log`, `sigmoid`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Square,
    Exp,
    Log,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Reference to a parent variable by name.
    Var(String),
    /// Reference to this node's own noise draw.
    Noise,
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        Parser::new(text).parse()
    }

    /// Evaluate with a variable lookup and an optional noise value.
    /// Division by zero and log of a non-positive argument are domain errors.
    pub fn eval<F: Fn(&str) -> Option<f64>>(&self, lookup: &F, noise: Option<f64>) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => lookup(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unbound variable `{name}`")))?,
            Expr::Noise => noise.ok_or_else(|| {
                Error::InvalidArgument("expression references `noise` but none was supplied".into())
            })?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(lookup, noise)?, b.eval(lookup, noise)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::InvalidArgument("division by zero".into()));
                        }
                        a / b
                    }
                }
            }
            Expr::Unary(op, a) => {
                let a = a.eval(lookup, noise)?;
                match op {
                    UnOp::Neg => -a,
                    UnOp::Square => a * a,
                    UnOp::Exp => a.exp(),
                    UnOp::Log => {
                        if a <= 0.0 {
                            return Err(Error::InvalidArgument(format!(
                                "log of non-positive value {a}"
                            )));
                        }
                        a.ln()
                    }
                    UnOp::Sigmoid => sigmoid(a),
                }
            }
        };
        if !v.is_finite() {
            return Err(Error::InvalidArgument(
                "expression evaluated to a non-finite value".into(),
            ));
        }
        Ok(v)
    }

    /// All variable names referenced by the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Unary(_, a) => a.collect_vars(out),
            _ => {}
        }
    }

    pub fn references_noise(&self) -> bool {
        match self {
            Expr::Noise => true,
            Expr::Binary(_, a, b) => a.references_noise() || b.references_noise(),
            Expr::Unary(_, a) => a.references_noise(),
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Noise => write!(f, "noise"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Unary(UnOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => {
                let name = match op {
                    UnOp::Square => "square",
                    UnOp::Exp => "exp",
                    UnOp::Log => "log",
                    UnOp::Sigmoid => "sigmoid",
                    UnOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            text,
        }
    }

    fn parse(mut self) -> Result<Expr> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.chars.len() {
            return Err(self.err(&format!("unexpected `{}`", self.chars[self.pos])));
        }
        Ok(e)
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!(
            "expression `{}` at offset {}: {msg}",
            self.text, self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                '+' => BinOp::Add,
                '-' => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            let op = match c {
                '*' => BinOp::Mul,
                '/' => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.factor()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected `{c}`"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_digit()
                || matches!(self.chars[self.pos], '.' | 'e' | 'E')
                || (matches!(self.chars[self.pos], '+' | '-')
                    && self.pos > start
                    && matches!(self.chars[self.pos - 1], 'e' | 'E')))
        {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.err(&format!("bad number `{s}`")))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let func = match name.as_str() {
            "noise" => return Ok(Expr::Noise),
            "square" => Some(UnOp::Square),
            "exp" => Some(UnOp::Exp),
            "log" => Some(UnOp::Log),
            "sigmoid" => Some(UnOp::Sigmoid),
            _ => None,
        };
        match func {
            Some(op) => {
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(Expr::Unary(op, Box::new(e)))
            }
            None => {
                if self.peek() == Some('(') {
                    return Err(self.err(&format!("unknown function `{name}`")));
                }
                Ok(Expr::Var(name))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, vars: &[(&str, f64)]) -> Result<f64> {
        let e = Expr::parse(text)?;
        e.eval(
            &|n| vars.iter().find(|(k, _)| *k == n).map(|(_, v)| *v),
            Some(0.5),
        )
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(eval("85 + 0.4*C + 40*Y + noise", &[("C", 60.0), ("Y", 1.0)]).unwrap(), 149.5);
        assert_eq!(eval("2 + 3 * 4", &[]).unwrap(), 14.0);
        assert_eq!(eval("-square(3) + 1", &[]).unwrap(), -8.0);
        assert!((eval("sigmoid(0)", &[]).unwrap() - 0.5).abs() < 1e-15);
        assert!((eval("30 * sigmoid(-0.5 * (H - 5))", &[("H", 5.0)]).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(eval("log(0 - 1)", &[]).is_err());
        assert!(eval("1 / (2 - 2)", &[]).is_err());
        assert!(eval("x + 1", &[]).is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(2)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
    }

    #[test]
    fn variables_and_noise_flags() {
        let e = Expr::parse("0.4*C + noise").unwrap();
        assert!(e.references_noise());
        assert_eq!(e.variables().into_iter().collect::<Vec<_>>(), vec!["C"]);
    }
}

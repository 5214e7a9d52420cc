//! A small arithmetic expression language for problem data.
//!
//! Expressions are parsed once into an AST and evaluated against a numeric
//! context. The variables are `x` (offset along the current edge), `t`
//! (time), `len` (length of the current edge) and `e` (edge index).
//! Supported syntax:
//!
//! ```text
//! literals      1, 0.5, 2e-3
//! arithmetic    + - * / ^          (^ is right-associative power)
//! comparison    < <= > >= ==       (evaluate to 1 or 0)
//! functions     min(a,b) max(a,b) abs(a) exp(a) sqrt(a) ite(c,a,b)
//! ```
//!
//! `ite(c, a, b)` returns `a` when `c` is nonzero and `b` otherwise, which
//! together with comparisons expresses piecewise data.

use crate::error::{Error, Result};

/// Variable bindings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx {
    /// Offset along the current edge.
    pub x: f64,
    /// Time.
    pub t: f64,
    /// Length of the current edge.
    pub len: f64,
    /// Edge index as a float.
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    T,
    Len,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    Abs(Box<Node>),
    Exp(Box<Node>),
    Sqrt(Box<Node>),
    Ite(Box<Node>, Box<Node>, Box<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    source: String,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Expression> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let root = p.parse_expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input in `{src}` at token {}",
                p.pos
            )));
        }
        Ok(Expression {
            root,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression reads the time variable.
    pub fn uses_time(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(v) => *v == Var::T,
                Node::Neg(a) | Node::Abs(a) | Node::Exp(a) | Node::Sqrt(a) => walk(a),
                Node::Bin(_, a, b) | Node::Min(a, b) | Node::Max(a, b) => walk(a) || walk(b),
                Node::Ite(c, a, b) => walk(c) || walk(a) || walk(b),
            }
        }
        walk(&self.root)
    }

    pub fn eval(&self, ctx: &EvalCtx) -> f64 {
        eval_node(&self.root, ctx)
    }
}

fn eval_node(n: &Node, ctx: &EvalCtx) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => ctx.x,
        Node::Var(Var::T) => ctx.t,
        Node::Var(Var::Len) => ctx.len,
        Node::Var(Var::E) => ctx.e,
        Node::Neg(a) => -eval_node(a, ctx),
        Node::Bin(op, a, b) => {
            let a = eval_node(a, ctx);
            let b = eval_node(b, ctx);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
                BinOp::Lt => (a < b) as u8 as f64,
                BinOp::Le => (a <= b) as u8 as f64,
                BinOp::Gt => (a > b) as u8 as f64,
                BinOp::Ge => (a >= b) as u8 as f64,
                BinOp::Eq => (a == b) as u8 as f64,
            }
        }
        Node::Min(a, b) => eval_node(a, ctx).min(eval_node(b, ctx)),
        Node::Max(a, b) => eval_node(a, ctx).max(eval_node(b, ctx)),
        Node::Abs(a) => eval_node(a, ctx).abs(),
        Node::Exp(a) => eval_node(a, ctx).exp(),
        Node::Sqrt(a) => eval_node(a, ctx).sqrt(),
        Node::Ite(c, a, b) => {
            if eval_node(c, ctx) != 0.0 {
                eval_node(a, ctx)
            } else {
                eval_node(b, ctx)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push(Tok::Le);
                    i += 2;
                } else {
                    out.push(Tok::Lt);
                    i += 1;
                }
            }
            '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push(Tok::Ge);
                    i += 2;
                } else {
                    out.push(Tok::Gt);
                    i += 1;
                }
            }
            '=' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push(Tok::EqEq);
                    i += 2;
                } else {
                    return Err(Error::Expr(format!("single `=` in `{src}`; use `==`")));
                }
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit() || bytes[i] == b'.' || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number `{text}` in `{src}`")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}` in `{src}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Expr(format!(
                "expected {tok:?}, found {other:?} in `{}`",
                self.src
            ))),
        }
    }

    fn parse_expr(&mut self) -> Result<Node> {
        let lhs = self.parse_add()?;
        let op = match self.peek() {
            Some(Tok::Lt) => Some(BinOp::Lt),
            Some(Tok::Le) => Some(BinOp::Le),
            Some(Tok::Gt) => Some(BinOp::Gt),
            Some(Tok::Ge) => Some(BinOp::Ge),
            Some(Tok::EqEq) => Some(BinOp::Eq),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.parse_add()?;
            Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn parse_add(&mut self) -> Result<Node> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_mul()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Node> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Node> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Node::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_pow()
    }

    fn parse_pow(&mut self) -> Result<Node> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp = self.parse_unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.bump();
                    let mut args = vec![self.parse_expr()?];
                    while matches!(self.peek(), Some(Tok::Comma)) {
                        self.bump();
                        args.push(self.parse_expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    self.build_call(&name, args)
                } else {
                    match name.as_str() {
                        "x" => Ok(Node::Var(Var::X)),
                        "t" => Ok(Node::Var(Var::T)),
                        "len" => Ok(Node::Var(Var::Len)),
                        "e" => Ok(Node::Var(Var::E)),
                        other => Err(Error::Expr(format!(
                            "unknown variable `{other}` in `{}`",
                            self.src
                        ))),
                    }
                }
            }
            other => Err(Error::Expr(format!(
                "unexpected token {other:?} in `{}`",
                self.src
            ))),
        }
    }

    fn build_call(&self, name: &str, mut args: Vec<Node>) -> Result<Node> {
        let arity_err = |want: usize| {
            Error::Expr(format!(
                "`{name}` takes {want} argument(s) in `{}`",
                self.src
            ))
        };
        match name {
            "min" | "max" => {
                if args.len() != 2 {
                    return Err(arity_err(2));
                }
                let b = Box::new(args.pop().unwrap());
                let a = Box::new(args.pop().unwrap());
                Ok(if name == "min" {
                    Node::Min(a, b)
                } else {
                    Node::Max(a, b)
                })
            }
            "abs" | "exp" | "sqrt" => {
                if args.len() != 1 {
                    return Err(arity_err(1));
                }
                let a = Box::new(args.pop().unwrap());
                Ok(match name {
                    "abs" => Node::Abs(a),
                    "exp" => Node::Exp(a),
                    _ => Node::Sqrt(a),
                })
            }
            "ite" => {
                if args.len() != 3 {
                    return Err(arity_err(3));
                }
                let b = Box::new(args.pop().unwrap());
                let a = Box::new(args.pop().unwrap());
                let c = Box::new(args.pop().unwrap());
                Ok(Node::Ite(c, a, b))
            }
            other => Err(Error::Expr(format!(
                "unknown function `{other}` in `{}`",
                self.src
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(x: f64, t: f64) -> EvalCtx {
        EvalCtx { x, t, len: 1.0, e: 0.0 }
    }

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expression::parse("1 + 2 * 3 - 4 / 2").unwrap();
        assert_eq!(e.eval(&ctx(0.0, 0.0)), 5.0);
        let e = Expression::parse("2 ^ 3 ^ 2").unwrap();
        assert_eq!(e.eval(&ctx(0.0, 0.0)), 512.0);
        let e = Expression::parse("-x ^ 2").unwrap();
        assert_eq!(e.eval(&ctx(3.0, 0.0)), -9.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expression::parse("abs(x - 0.5)").unwrap();
        assert_eq!(e.eval(&ctx(0.2, 0.0)), 0.3);
        let e = Expression::parse("min(x, t) + max(x, t)").unwrap();
        assert_eq!(e.eval(&ctx(0.25, 0.75)), 1.0);
        let e = Expression::parse("exp(0) + sqrt(4)").unwrap();
        assert_eq!(e.eval(&ctx(0.0, 0.0)), 3.0);
    }

    #[test]
    fn piecewise() {
        let e = Expression::parse("ite(x <= 0.5, 1, 2)").unwrap();
        assert_eq!(e.eval(&ctx(0.25, 0.0)), 1.0);
        assert_eq!(e.eval(&ctx(0.75, 0.0)), 2.0);
    }

    #[test]
    fn detects_time_use() {
        assert!(Expression::parse("x + t").unwrap().uses_time());
        assert!(!Expression::parse("x * len + e").unwrap().uses_time());
        assert!(Expression::parse("ite(t < 1, x, 0)").unwrap().uses_time());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expression::parse("x +").is_err());
        assert!(Expression::parse("foo(1)").is_err());
        assert!(Expression::parse("y + 1").is_err());
        assert!(Expression::parse("min(1)").is_err());
        assert!(Expression::parse("1 = 2").is_err());
    }

    #[test]
    fn scientific_literals() {
        let e = Expression::parse("2e-3 + 1E2").unwrap();
        assert_eq!(e.eval(&ctx(0.0, 0.0)), 100.002);
    }
}

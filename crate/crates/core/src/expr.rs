//! Component-wise expression language for immersions defined in config files.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-'? power
//! power  := atom ('^' power)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers `u1` … `u9` are chart coordinates, `pi` and `e` are constants.
//! Known functions: `sin cos tan exp log sqrt atan` (one argument) and
//! `pow` (two arguments). Unary minus binds looser than `^`, so `-u2^2` is
//! `-(u2^2)`.

use std::fmt;

use thiserror::Error;

use crate::jets::{DomainError, Jet};
use crate::scalar::Real;

/// Byte range `[start, end)` into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Number(f64),
    Const(NamedConst),
    /// Zero-based coordinate index (`u1` is 0).
    Variable(usize),
    /// Identifier that is neither a coordinate nor a constant; rejected by
    /// [`Ast::validate`].
    Ident(String),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(String, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
}

impl Node {
    /// Structural equality ignoring spans.
    pub fn same_shape(&self, other: &Node) -> bool {
        use NodeKind::*;
        match (&self.kind, &other.kind) {
            (Number(a), Number(b)) => a == b,
            (Const(a), Const(b)) => a == b,
            (Variable(a), Variable(b)) => a == b,
            (Ident(a), Ident(b)) => a == b,
            (Neg(a), Neg(b)) => a.same_shape(b),
            (Binary(o1, l1, r1), Binary(o2, l2, r2)) => {
                o1 == o2 && l1.same_shape(l2) && r1.same_shape(r2)
            }
            (Call(f, a), Call(g, b)) => {
                f == g && a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
            }
            _ => false,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Number(x) => write!(f, "{x}"),
            NodeKind::Const(NamedConst::Pi) => f.write_str("pi"),
            NodeKind::Const(NamedConst::E) => f.write_str("e"),
            NodeKind::Variable(i) => write!(f, "u{}", i + 1),
            NodeKind::Ident(s) => f.write_str(s),
            NodeKind::Neg(x) => write!(f, "(-{x})"),
            NodeKind::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            NodeKind::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Ast {
    source: String,
    root: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at column {}: expected {expected}, found {found}", .offset + 1)]
pub struct ParseError {
    /// Byte offset of the offending token (equal to the source length at end of input).
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

/// One problem found by [`Ast::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}: {}", self.span.start, self.span.end, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{source_text}: {domain}")]
    Domain {
        source_text: String,
        span: Span,
        domain: DomainError,
    },
    #[error("expression is not valid: {0}")]
    Invalid(String),
}

fn arity(name: &str) -> Option<usize> {
    match name {
        "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "atan" => Some(1),
        "pow" => Some(2),
        _ => None,
    }
}

impl Ast {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            len: source.len(),
        };
        let root = p.expr()?;
        let tok = p.peek();
        if tok.kind != Tok::Eof {
            return Err(ParseError {
                offset: tok.span.start,
                expected: "operator or end of input".into(),
                found: tok.kind.describe(),
            });
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Exact source slice covered by `span`.
    pub fn slice(&self, span: Span) -> &str {
        &self.source[span.start..span.end]
    }

    /// Checks coordinate indices, identifiers and function arities.
    pub fn validate(&self, chart_dim: usize) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        walk_validate(&self.root, chart_dim, &mut issues);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// Evaluates at a chart point, seeding one variable jet per coordinate.
    pub fn eval_jet<T: Real>(&self, point: &[T]) -> Result<Jet<T>, EvalError> {
        let vars = Jet::seed(point);
        Ok(self.eval_on(&vars)?.widen(point.len()))
    }

    /// Evaluates with caller-provided coordinate jets (used for composition).
    pub fn eval_on<T: Real>(&self, vars: &[Jet<T>]) -> Result<Jet<T>, EvalError> {
        self.eval_node(&self.root, vars)
    }

    fn eval_node<T: Real>(&self, node: &Node, vars: &[Jet<T>]) -> Result<Jet<T>, EvalError> {
        let domain = |d: DomainError| EvalError::Domain {
            source_text: self.slice(node.span).to_string(),
            span: node.span,
            domain: d,
        };
        Ok(match &node.kind {
            NodeKind::Number(x) => Jet::constant(T::lit(*x)),
            NodeKind::Const(NamedConst::Pi) => Jet::constant(T::pi()),
            NodeKind::Const(NamedConst::E) => Jet::constant(T::e()),
            NodeKind::Variable(i) => *vars
                .get(*i)
                .ok_or_else(|| EvalError::Invalid(format!("u{} not provided", i + 1)))?,
            NodeKind::Ident(s) => return Err(EvalError::Invalid(format!("unknown identifier '{s}'"))),
            NodeKind::Neg(x) => -self.eval_node(x, vars)?,
            NodeKind::Binary(op, l, r) => {
                let a = self.eval_node(l, vars)?;
                let b = self.eval_node(r, vars)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.try_div(&b).map_err(domain)?,
                    BinOp::Pow => a.try_pow(&b).map_err(domain)?,
                }
            }
            NodeKind::Call(name, args) => {
                if arity(name) != Some(args.len()) {
                    return Err(EvalError::Invalid(format!("bad call {name}/{}", args.len())));
                }
                let a = self.eval_node(&args[0], vars)?;
                match name.as_str() {
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "tan" => a.try_tan().map_err(domain)?,
                    "exp" => a.exp(),
                    "log" => a.try_ln().map_err(domain)?,
                    "sqrt" => a.try_sqrt().map_err(domain)?,
                    "atan" => a.atan(),
                    "pow" => {
                        let b = self.eval_node(&args[1], vars)?;
                        a.try_pow(&b).map_err(domain)?
                    }
                    _ => unreachable!("arity checked"),
                }
            }
        })
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

fn walk_validate(node: &Node, chart_dim: usize, issues: &mut Vec<ValidationIssue>) {
    match &node.kind {
        NodeKind::Variable(i) if *i >= chart_dim => issues.push(ValidationIssue {
            span: node.span,
            message: format!("u{} exceeds chart dimension {chart_dim}", i + 1),
        }),
        NodeKind::Ident(s) => issues.push(ValidationIssue {
            span: node.span,
            message: format!("unknown identifier '{s}'"),
        }),
        NodeKind::Neg(x) => walk_validate(x, chart_dim, issues),
        NodeKind::Binary(_, l, r) => {
            walk_validate(l, chart_dim, issues);
            walk_validate(r, chart_dim, issues);
        }
        NodeKind::Call(name, args) => {
            match arity(name) {
                None => issues.push(ValidationIssue {
                    span: node.span,
                    message: format!("unknown function '{name}'"),
                }),
                Some(n) if n != args.len() => issues.push(ValidationIssue {
                    span: node.span,
                    message: format!(
                        "function '{name}' expects {n} argument{}, got {}",
                        if n == 1 { "" } else { "s" },
                        args.len()
                    ),
                }),
                Some(_) => {}
            }
            for a in args {
                walk_validate(a, chart_dim, issues);
            }
        }
        _ => {}
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
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    span: Span,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(kind) = single {
            i += 1;
            out.push(Token {
                kind,
                span: Span { start, end: i },
            });
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                expected: "decimal number".into(),
                found: format!("'{text}'"),
            })?;
            out.push(Token {
                kind: Tok::Num(value),
                span: Span { start, end: i },
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: Tok::Ident(src[start..i].to_string()),
                span: Span { start, end: i },
            });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(ParseError {
            offset: start,
            expected: "expression".into(),
            found: format!("character '{ch}'"),
        });
    }
    out.push(Token {
        kind: Tok::Eof,
        span: Span {
            start: src.len(),
            end: src.len(),
        },
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: Tok, what: &str) -> Result<Token, ParseError> {
        let t = self.peek().clone();
        if t.kind == kind {
            Ok(self.bump())
        } else {
            Err(ParseError {
                offset: t.span.start.min(self.len),
                expected: what.into(),
                found: t.kind.describe(),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().kind {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if self.peek().kind == Tok::Minus {
            let start = self.bump().span.start;
            let inner = self.power()?;
            let end = inner.span.end;
            return Ok(Node {
                kind: NodeKind::Neg(Box::new(inner)),
                span: Span { start, end },
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek().kind == Tok::Caret {
            self.bump();
            let exp = self.power()?;
            return Ok(binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let t = self.bump();
        match t.kind {
            Tok::Num(x) => Ok(Node {
                kind: NodeKind::Number(x),
                span: t.span,
            }),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen, "')'")?;
                Ok(Node {
                    kind: inner.kind,
                    span: Span {
                        start: t.span.start,
                        end: close.span.end,
                    },
                })
            }
            Tok::Ident(name) => {
                if self.peek().kind == Tok::LParen {
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek().kind == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    let close = self.expect(Tok::RParen, "')'")?;
                    return Ok(Node {
                        kind: NodeKind::Call(name, args),
                        span: Span {
                            start: t.span.start,
                            end: close.span.end,
                        },
                    });
                }
                let kind = match name.as_str() {
                    "pi" => NodeKind::Const(NamedConst::Pi),
                    "e" => NodeKind::Const(NamedConst::E),
                    _ => match coordinate_index(&name) {
                        Some(i) => NodeKind::Variable(i),
                        None => NodeKind::Ident(name),
                    },
                };
                Ok(Node { kind, span: t.span })
            }
            other => Err(ParseError {
                offset: t.span.start,
                expected: "number, identifier or '('".into(),
                found: other.describe(),
            }),
        }
    }
}

fn coordinate_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('u')?;
    match digits.parse::<usize>() {
        Ok(k) if (1..=9).contains(&k) && digits.len() == 1 => Some(k - 1),
        _ => None,
    }
}

fn binary(op: BinOp, l: Node, r: Node) -> Node {
    let span = Span {
        start: l.span.start,
        end: r.span.end,
    };
    Node {
        kind: NodeKind::Binary(op, Box::new(l), Box::new(r)),
        span,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Ast {
        Ast::parse(s).unwrap()
    }

    #[test]
    fn product_of_cosines() {
        let ast = parse("cos(u1)*cos(u2)");
        let expected = parse("(cos(u1)) * (cos(u2))");
        assert!(ast.root().same_shape(expected.root()));
        match &ast.root().kind {
            NodeKind::Binary(BinOp::Mul, l, r) => {
                assert!(matches!(&l.kind, NodeKind::Call(n, _) if n == "cos"));
                assert!(matches!(&r.kind, NodeKind::Call(n, _) if n == "cos"));
            }
            k => panic!("unexpected {k:?}"),
        }
    }

    #[test]
    fn unary_minus_looser_than_power() {
        let ast = parse("u1 + -u2^2");
        let NodeKind::Binary(BinOp::Add, l, r) = &ast.root().kind else {
            panic!()
        };
        assert_eq!(l.kind, NodeKind::Variable(0));
        let NodeKind::Neg(inner) = &r.kind else { panic!() };
        let NodeKind::Binary(BinOp::Pow, b, e) = &inner.kind else {
            panic!()
        };
        assert_eq!(b.kind, NodeKind::Variable(1));
        assert_eq!(e.kind, NodeKind::Number(2.0));
    }

    #[test]
    fn power_is_right_associative() {
        let ast = parse("u1^2^3");
        assert!(ast.root().same_shape(parse("u1^(2^3)").root()));
    }

    #[test]
    fn unclosed_call_reports_position() {
        let err = Ast::parse("sin(u1").unwrap_err();
        assert_eq!(err.offset, 6);
        assert_eq!(err.expected, "')'");
        assert!(err.to_string().contains("column 7"), "{err}");
    }

    #[test]
    fn spans_reconstruct_source() {
        let src = "  sin(u1) * (u2 + 3.5e-1)";
        let ast = parse(src);
        assert_eq!(ast.slice(ast.root().span), "sin(u1) * (u2 + 3.5e-1)");
        let NodeKind::Binary(_, l, r) = &ast.root().kind else {
            panic!()
        };
        assert_eq!(ast.slice(l.span), "sin(u1)");
        assert_eq!(ast.slice(r.span), "(u2 + 3.5e-1)");
    }

    #[test]
    fn validate_examples() {
        let errs = parse("u3").validate(2).unwrap_err();
        assert_eq!(errs[0].message, "u3 exceeds chart dimension 2");
        let errs = parse("sin(u1,u2)").validate(3).unwrap_err();
        assert!(errs[0].message.contains("expects 1 argument"));
        assert!(parse("cos(u1)*u2").validate(2).is_ok());
        let errs = parse("foo + bar(u1)").validate(1).unwrap_err();
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn eval_examples() {
        let j = parse("u1*u2").eval_jet(&[2.0, 5.0]).unwrap();
        assert_eq!(j.value(), 10.0);
        assert_eq!((j.grad(0), j.grad(1)), (5.0, 2.0));
        assert_eq!(j.hess(0, 1), 1.0);
        assert_eq!(j.hess(0, 0), 0.0);

        let j = parse("sqrt(u1)").eval_jet(&[4.0f64]).unwrap();
        assert_eq!(j.value(), 2.0);
        assert!((j.grad(0) - 0.25).abs() < 1e-15);
        assert!((j.hess(0, 0) + 1.0 / 32.0).abs() < 1e-15);

        let err = parse("1 + log(u1)").eval_jet(&[0.0]).unwrap_err();
        match err {
            EvalError::Domain { source_text, .. } => assert_eq!(source_text, "log(u1)"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn constant_expression_has_chart_dimension() {
        let j = parse("pi").eval_jet(&[1.0, 2.0]).unwrap();
        assert_eq!(j.dim(), 2);
        assert_eq!(j.gradient(), vec![0.0, 0.0]);
    }

    #[test]
    fn pretty_print_round_trip() {
        for src in ["u1 + -u2^2", "pow(u1, 3) / (1 + u2*u2)", "-sin(u1)^2*e - pi", "2^-1"] {
            let Ok(ast) = Ast::parse(src) else { continue };
            let again = parse(&ast.to_string());
            assert!(ast.root().same_shape(again.root()), "{src} -> {ast}");
        }
    }

    #[test]
    fn junk_characters_rejected() {
        let err = Ast::parse("u1 $ u2").unwrap_err();
        assert_eq!(err.offset, 3);
        let err = Ast::parse("u1 u2").unwrap_err();
        assert_eq!(err.offset, 3);
    }
}

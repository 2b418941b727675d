//! Scalar expressions in the arc-length variable `s`.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 's' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt | abs
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-s^2`
//! is `-(s^2)` and `2^-s` is `2^(-s)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => *offset,
        }
    }
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
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Num(f64),
    Const(Constant),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A failed evaluation: the expression left its real domain.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{reason}")]
pub struct EvalFault {
    pub reason: String,
}

fn fault(reason: impl Into<String>) -> EvalFault {
    EvalFault { reason: reason.into() }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// The expression if it does not depend on `s`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Const(c) => Some(c.value()),
            Expr::Neg(a) => a.as_constant().map(|v| -v),
            _ => None,
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64, EvalFault> {
        let v = match self {
            Expr::Var => s,
            Expr::Num(v) => *v,
            Expr::Const(c) => c.value(),
            Expr::Neg(a) => -a.eval(s)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(s)?;
                let y = b.eval(s)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(fault("division by zero"));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        let r = x.powf(y);
                        if r.is_nan() {
                            return Err(fault(format!("{x}^{y} is not real")));
                        }
                        r
                    }
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(s)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(fault(format!("log of non-positive value {x}")));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(fault(format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fault("non-finite value"))
        }
    }

    fn print_precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            _ => 5,
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(ParseError::Syntax {
            offset: t.offset,
            message: format!("unexpected {}", t.kind.describe()),
        }),
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse_expression(s)
    }
}

/// Canonical printer: minimal parentheses, re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => f.write_str("s"),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
            Expr::Neg(a) => {
                if a.print_precedence() < 3 {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-{a}")
                }
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                let left_parens = if *op == BinOp::Pow {
                    a.print_precedence() <= p
                } else {
                    a.print_precedence() < p
                };
                let right_parens = match (op, b.as_ref()) {
                    (_, Expr::Neg(_)) => false,
                    (_, Expr::Num(_)) if b.print_precedence() == 3 => false,
                    (BinOp::Pow, _) => b.print_precedence() < p,
                    _ => b.print_precedence() <= p,
                };
                if left_parens {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if right_parens {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("`{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when followed by digits, so `2*e` stays a constant
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(v),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else {
            let kind = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => TokenKind::Op(c as char),
                b'(' => TokenKind::LParen,
                b')' => TokenKind::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{ch}`"),
                    });
                }
            };
            i += 1;
            out.push(Token { kind, offset: start });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c), ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::Syntax {
                offset: t.offset,
                message: format!("expected `)`, found {}", t.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                message: "expected `)`, found end of input".into(),
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                let is_call = matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    })
                );
                if is_call {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        name: name.clone(),
                        offset: tok.offset,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::call(func, arg));
                }
                match name.as_str() {
                    "s" => Ok(Expr::Var),
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    _ => Err(ParseError::UnknownIdentifier {
                        name,
                        offset: tok.offset,
                    }),
                }
            }
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(text: &str, s: f64) -> f64 {
        parse_expression(text).unwrap().eval(s).unwrap()
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(eval("s^2/2", 2.0), 2.0);
        assert_eq!(eval("-s^2/2 + 0.3*s + 0.1", 0.0), 0.1);
        assert_eq!(eval("2^3^2", 0.0), 512.0);
        assert_eq!(eval("-s^2", 3.0), -9.0);
        assert_eq!(eval("2^-s", 1.0), 0.5);
        assert_eq!(eval("1 - 2 - 3", 0.0), -4.0);
        assert_eq!(eval("8 / 2 / 2", 0.0), 2.0);
        assert!((eval("2*e", 0.0) - 2.0 * std::f64::consts::E).abs() < 1e-15);
        assert_eq!(eval("1.5e2", 0.0), 150.0);
        assert!((eval("sqrt(abs(-4)) * cos(pi)", 0.0) + 2.0).abs() < 1e-15);
        assert_eq!(eval("  3*( s +1 ) ", 1.0), 6.0);
    }

    #[test]
    fn reports_syntax_offsets() {
        let err = parse_expression("sin(s").unwrap_err();
        assert_eq!(err.offset(), 5);
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert_eq!(parse_expression("1 + * 2").unwrap_err().offset(), 4);
        assert_eq!(parse_expression("s s").unwrap_err().offset(), 2);
        assert_eq!(parse_expression("").unwrap_err().offset(), 0);
        assert_eq!(parse_expression("2 # 3").unwrap_err().offset(), 2);
    }

    #[test]
    fn rejects_unknown_identifiers() {
        let err = parse_expression("1 + t").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "t".into(),
                offset: 4
            }
        );
        assert!(matches!(
            parse_expression("foo(s)"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn domain_faults() {
        let e = parse_expression("1/s").unwrap();
        assert!(e.eval(0.0).is_err());
        assert!(parse_expression("log(s)").unwrap().eval(-1.0).is_err());
        assert!(parse_expression("sqrt(s)").unwrap().eval(-1.0).is_err());
        assert!(parse_expression("(-2)^0.5").unwrap().eval(0.0).is_err());
        assert!(parse_expression("exp(s)").unwrap().eval(1e4).is_err());
    }

    const CORPUS: [&str; 50] = [
        "s",
        "1",
        "-s",
        "--s",
        "s^2/2",
        "-s^2/2 + 0.3*s + 0.1",
        "2^3^2",
        "(2^3)^2",
        "-(s + 1)",
        "-(s * 2)",
        "(-s)^2",
        "-s^2",
        "2^-s",
        "s - (s - 1)",
        "s - s - 1",
        "s / (s / 2)",
        "s / s / 2",
        "s * -2",
        "s + -2",
        "1 - -s",
        "sin(s)",
        "cos(2*pi*s)",
        "tan(s/4)",
        "exp(-s^2)",
        "log(1 + s^2)",
        "sqrt(abs(s) + 1)",
        "abs(sin(s))^3",
        "e^s",
        "pi*e",
        "1e-3*s",
        "2.5e+2",
        "0.000001",
        "123456789.125",
        "(1 + s)*(1 - s)",
        "(1 + s)/(1 - s)^2",
        "3*(1 + s^2)",
        "1 + s^2",
        "exp(s)/2",
        "-exp(s)/2",
        "s^(1/2)",
        "s^-1^2",
        "(s^2)^3",
        "sin(cos(tan(s)))",
        "-(-(-s))",
        "((((s))))",
        "1 + 2*3 - 4/5^6",
        "-2*s^2 + s",
        "cos(s)*(1 - sin(s))",
        "exp(s/sqrt(2)) + 3*exp(-s/sqrt(2))",
        "2 - 3 + 4 - 5*6*s/7",
    ];

    #[test]
    fn printer_round_trips_corpus() {
        for text in CORPUS {
            let tree = parse_expression(text).unwrap();
            let printed = tree.to_string();
            let again = parse_expression(&printed).unwrap_or_else(|e| panic!("{text} printed as {printed}: {e}"));
            assert_eq!(tree, again, "{text} -> {printed}");
        }
    }

    #[test]
    fn negative_literals_print_safely() {
        let tree = Expr::bin(BinOp::Pow, Expr::num(-0.5), Expr::num(2.0));
        let again = parse_expression(&tree.to_string()).unwrap();
        assert_eq!(again.eval(0.0).unwrap(), 0.25);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            Just(Expr::Var),
            (0.0..100.0f64).prop_map(Expr::Num),
            Just(Expr::Const(Constant::Pi)),
            Just(Expr::Const(Constant::E)),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
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
                    .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
                (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expr::call(f, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_trees_reparse_identically(e in arb_expr()) {
            let printed = e.to_string();
            let again = parse_expression(&printed).unwrap();
            prop_assert_eq!(e, again);
        }
    }
}

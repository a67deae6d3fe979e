//! Real-valued coefficient expressions in one variable `x`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?          -- right associative
//! atom   := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
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
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => libm::sin(v),
            Func::Cos => libm::cos(v),
            Func::Tan => libm::tan(v),
            Func::Exp => libm::exp(v),
            Func::Log => libm::log(v),
            Func::Sinh => libm::sinh(v),
            Func::Cosh => libm::cosh(v),
            Func::Tanh => libm::tanh(v),
            Func::Sqrt => libm::sqrt(v),
            Func::Abs => libm::fabs(v),
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Number(f64),
    X,
    Pi,
    E,
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        parse_expression(src)
    }

    pub fn constant(v: f64) -> Self {
        if v < 0.0 {
            Expression::Neg(Box::new(Expression::Number(-v)))
        } else {
            Expression::Number(v)
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expression::Number(v) => *v,
            Expression::X => x,
            Expression::Pi => core::f64::consts::PI,
            Expression::E => core::f64::consts::E,
            Expression::Neg(a) => -a.eval(x),
            Expression::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expression::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// True when the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expression::X => false,
            Expression::Number(_) | Expression::Pi | Expression::E => true,
            Expression::Neg(a) | Expression::Call(_, a) => a.is_constant(),
            Expression::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// True for the literal tree `0` (possibly negated).
    pub fn is_zero_literal(&self) -> bool {
        match self {
            Expression::Number(v) => *v == 0.0,
            Expression::Neg(a) => a.is_zero_literal(),
            _ => false,
        }
    }
}

/// Integer exponents go through repeated multiplication so that `x^2` is
/// exactly `x*x`.
fn pow(a: f64, b: f64) -> f64 {
    if b == libm::trunc(b) && libm::fabs(b) <= 64.0 {
        let mut n = libm::fabs(b) as u32;
        let mut base = a;
        let mut acc = 1.0;
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base *= base;
            n >>= 1;
        }
        if b < 0.0 {
            1.0 / acc
        } else {
            acc
        }
    } else {
        libm::pow(a, b)
    }
}

/// Fully parenthesized rendering; parsing it back gives the same tree up to
/// the sign of literals, and the same value bit for bit.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Number(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expression::Number(v) => write!(f, "{v}"),
            Expression::X => f.write_str("x"),
            Expression::Pi => f.write_str("pi"),
            Expression::E => f.write_str("e"),
            Expression::Neg(a) => write!(f, "(-{a})"),
            Expression::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({a}{sym}{b})")
            }
            Expression::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Parses a coefficient expression. Errors carry byte offsets into `src`.
pub fn parse_expression(src: &str) -> Result<Expression> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".to_string(),
        });
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(Error::Syntax {
            offset: t.offset,
            message: alloc::format!("unexpected {}", t.kind.describe()),
        });
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Number(v) => alloc::format!("number {v}"),
            Kind::Ident(s) => alloc::format!("identifier `{s}`"),
            Kind::Op(c) => alloc::format!("`{c}`"),
            Kind::LParen => "`(`".to_string(),
            Kind::RParen => "`)`".to_string(),
            Kind::Comma => "`,`".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: Kind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push(Token {
                    kind: Kind::Op(c as char),
                    offset: start,
                });
                i += 1;
            }
            b'(' | b')' | b',' => {
                let kind = match c {
                    b'(' => Kind::LParen,
                    b')' => Kind::RParen,
                    _ => Kind::Comma,
                };
                out.push(Token { kind, offset: start });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when digits follow, so `2e` stays `2` then `e`
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
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: alloc::format!("malformed number `{text}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Syntax {
                        offset: start,
                        message: alloc::format!("number `{text}` is out of range"),
                    });
                }
                out.push(Token {
                    kind: Kind::Number(v),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: Kind::Ident(src[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    message: alloc::format!("unexpected character `{ch}`"),
                });
            }
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
                kind: Kind::Op(c), ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expression::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expression> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expression::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.next() {
            Some(Token {
                kind: Kind::RParen, ..
            }) => Ok(()),
            Some(t) => Err(Error::Syntax {
                offset: t.offset,
                message: alloc::format!("expected `)`, found {}", t.kind.describe()),
            }),
            None => Err(Error::Syntax {
                offset: self.end,
                message: "expected `)`, found end of input".to_string(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expression> {
        let offset = self.here();
        let Some(tok) = self.next() else {
            return Err(Error::Syntax {
                offset,
                message: "unexpected end of input".to_string(),
            });
        };
        match tok.kind {
            Kind::Number(v) => Ok(Expression::Number(v)),
            Kind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if let Some(func) = Func::lookup(&name) {
                    match self.next() {
                        Some(Token {
                            kind: Kind::LParen, ..
                        }) => {}
                        _ => {
                            return Err(Error::Syntax {
                                offset: tok.offset + name.len(),
                                message: alloc::format!("expected `(` after `{name}`"),
                            })
                        }
                    }
                    let mut args = Vec::new();
                    if !matches!(self.peek().map(|t| &t.kind), Some(Kind::RParen)) {
                        args.push(self.expr()?);
                        while matches!(self.peek().map(|t| &t.kind), Some(Kind::Comma)) {
                            self.pos += 1;
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_rparen()?;
                    if args.len() != 1 {
                        return Err(Error::Arity {
                            name,
                            expected: 1,
                            found: args.len(),
                        });
                    }
                    return Ok(Expression::Call(func, Box::new(args.pop().unwrap())));
                }
                match name.as_str() {
                    "x" => Ok(Expression::X),
                    "pi" => Ok(Expression::Pi),
                    "e" => Ok(Expression::E),
                    _ => Err(Error::UnknownIdentifier {
                        name,
                        offset: tok.offset,
                    }),
                }
            }
            other => Err(Error::Syntax {
                offset: tok.offset,
                message: alloc::format!("unexpected {}", other.describe()),
            }),
        }
    }
}

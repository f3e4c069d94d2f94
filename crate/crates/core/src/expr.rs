//! Expression mini-language for test functions `u` and polynomial defining
//! functions `rho`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' integer)*
//! atom  := number | 'i' | 'z'<k> | 'w'<k> | 'conj' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Symbol indices are 1-based in text and 0-based in the tree. `w` symbols
//! never become independent variables: they are resolved through the dual
//! map of the chart the expression is evaluated on.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(C64),
    Z(usize),
    W(usize),
    Conj(Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Denominators below this magnitude at the base point are rejected.
pub const POLE_TOL: f64 = 1e-8;

impl Expr {
    pub fn num(re: f64) -> Expr {
        Expr::Num(C64::new(re, 0.0))
    }

    pub fn complex(value: C64) -> Expr {
        Expr::Num(value)
    }

    pub fn conj(self) -> Expr {
        Expr::Conj(Box::new(self))
    }

    pub fn pow(self, exponent: u32) -> Expr {
        Expr::Pow(Box::new(self), exponent)
    }

    /// Largest symbol index used (1-based), 0 if none.
    pub fn max_index(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Z(k) | Expr::W(k) => k + 1,
            Expr::Conj(e) | Expr::Neg(e) | Expr::Pow(e, _) => e.max_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_index().max(b.max_index())
            }
        }
    }

    pub fn uses_w(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Z(_) => false,
            Expr::W(_) => true,
            Expr::Conj(e) | Expr::Neg(e) | Expr::Pow(e, _) => e.uses_w(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_w() || b.uses_w()
            }
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        let index = self.max_index();
        if index > dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        Ok(())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(c) if c.im == 0.0 => {
                if c.re < 0.0 {
                    3
                } else {
                    5
                }
            }
            Expr::Num(c) if c.re == 0.0 && c.im == 1.0 => 5,
            Expr::Num(c) if c.re == 0.0 => 2,
            Expr::Num(_) => 1,
            _ => 5,
        }
    }

    /// Replaces `z_k` by `z_map[k]` and `w_k` by `w_map[k]`.
    pub fn substitute(&self, z_map: &[Expr], w_map: &[Expr]) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(z_map, w_map));
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Z(k) => z_map[*k].clone(),
            Expr::W(k) => w_map[*k].clone(),
            Expr::Conj(e) => Expr::Conj(sub(e)),
            Expr::Neg(e) => Expr::Neg(sub(e)),
            Expr::Pow(e, p) => Expr::Pow(sub(e), *p),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
        }
    }

    /// Wirtinger derivative `d/dz_k` (or `d/dconj(z_k)` when `anti`).
    /// Only defined for expressions without `w` symbols.
    pub fn wirtinger(&self, k: usize, anti: bool) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Expr::num(0.0),
            Z(j) => Expr::num(if *j == k && !anti { 1.0 } else { 0.0 }),
            W(_) => panic!("wirtinger derivative of a w-symbol"),
            Conj(e) => simplify_conj(e.wirtinger(k, !anti)),
            Neg(e) => simplify_neg(e.wirtinger(k, anti)),
            Add(a, b) => simplify_add(a.wirtinger(k, anti), b.wirtinger(k, anti)),
            Sub(a, b) => simplify_add(a.wirtinger(k, anti), simplify_neg(b.wirtinger(k, anti))),
            Mul(a, b) => simplify_add(
                simplify_mul(a.wirtinger(k, anti), (**b).clone()),
                simplify_mul((**a).clone(), b.wirtinger(k, anti)),
            ),
            Div(a, b) => {
                let num = simplify_add(
                    simplify_mul(a.wirtinger(k, anti), (**b).clone()),
                    simplify_neg(simplify_mul((**a).clone(), b.wirtinger(k, anti))),
                );
                if is_zero(&num) {
                    num
                } else {
                    Div(Box::new(num), Box::new(Pow(b.clone(), 2)))
                }
            }
            Pow(e, p) => match p {
                0 => Expr::num(0.0),
                1 => e.wirtinger(k, anti),
                _ => {
                    let inner = e.wirtinger(k, anti);
                    if is_zero(&inner) {
                        return inner;
                    }
                    let lowered = if *p == 2 {
                        (**e).clone()
                    } else {
                        Pow(e.clone(), p - 1)
                    };
                    simplify_mul(simplify_mul(Expr::num(*p as f64), lowered), inner)
                }
            },
        }
    }

    /// Evaluates at a point; `w` is required when the expression uses it.
    pub fn eval_point(&self, z: &[C64], w: Option<&[C64]>) -> Result<C64> {
        Ok(match self {
            Expr::Num(c) => *c,
            Expr::Z(k) => z[*k],
            Expr::W(k) => w.ok_or(Error::DualSymbolsUnavailable)?[*k],
            Expr::Conj(e) => e.eval_point(z, w)?.conj(),
            Expr::Neg(e) => -e.eval_point(z, w)?,
            Expr::Add(a, b) => a.eval_point(z, w)? + b.eval_point(z, w)?,
            Expr::Sub(a, b) => a.eval_point(z, w)? - b.eval_point(z, w)?,
            Expr::Mul(a, b) => a.eval_point(z, w)? * b.eval_point(z, w)?,
            Expr::Div(a, b) => {
                let d = b.eval_point(z, w)?;
                if d.norm() < POLE_TOL {
                    return Err(Error::DivisionBySingularJet {
                        magnitude: d.norm(),
                    });
                }
                a.eval_point(z, w)? / d
            }
            Expr::Pow(e, p) => e.eval_point(z, w)?.powu(*p),
        })
    }

    /// Evaluates in jet space given the jets of `z_k` and (optionally) `w_k`.
    pub fn eval_jets(&self, z: &[Jet], w: Option<&[Jet]>) -> Result<Jet> {
        Ok(match self {
            Expr::Num(c) => Jet::constant(z[0].num_vars(), z[0].order(), *c),
            Expr::Z(k) => z[*k].clone(),
            Expr::W(k) => w.ok_or(Error::DualSymbolsUnavailable)?[*k].clone(),
            Expr::Conj(e) => e.eval_jets(z, w)?.conj(),
            Expr::Neg(e) => -e.eval_jets(z, w)?,
            Expr::Add(a, b) => &a.eval_jets(z, w)? + &b.eval_jets(z, w)?,
            Expr::Sub(a, b) => &a.eval_jets(z, w)? - &b.eval_jets(z, w)?,
            Expr::Mul(a, b) => &a.eval_jets(z, w)? * &b.eval_jets(z, w)?,
            Expr::Div(a, b) => {
                let d = b.eval_jets(z, w)?;
                let inv = d.recip_with_tol(POLE_TOL)?;
                &a.eval_jets(z, w)? * &inv
            }
            Expr::Pow(e, p) => e.eval_jets(z, w)?.powi(*p),
        })
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if c.re == 0.0 && c.im == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if c.re == 1.0 && c.im == 0.0)
}

fn simplify_add(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (true, _) => b,
        (_, true) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn simplify_mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::num(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    Expr::Mul(Box::new(a), Box::new(b))
}

fn simplify_neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        other => Expr::Neg(Box::new(other)),
    }
}

fn simplify_conj(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(c.conj()),
        other => Expr::Conj(Box::new(other)),
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8| -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(c) => {
                if c.im == 0.0 {
                    write!(f, "{}", fmt_real(c.re))
                } else if c.re == 0.0 {
                    if c.im == 1.0 {
                        write!(f, "i")
                    } else {
                        write!(f, "{}*i", fmt_real(c.im))
                    }
                } else {
                    write!(f, "{} + {}*i", fmt_real(c.re), fmt_real(c.im))
                }
            }
            Expr::Z(k) => write!(f, "z{}", k + 1),
            Expr::W(k) => write!(f, "w{}", k + 1),
            Expr::Conj(e) => write!(f, "conj({e})"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, 3)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(e, p) => {
                wrap(f, e, 4)?;
                write!(f, "^{p}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Int(u32),
    I,
    Conj,
    Z(usize),
    W(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(x) => format!("number {x}"),
            Token::Int(x) => format!("integer {x}"),
            Token::I => "'i'".into(),
            Token::Conj => "'conj'".into(),
            Token::Z(k) => format!("z{k}"),
            Token::W(k) => format!("w{k}"),
            Token::Plus => "'+'".into(),
            Token::Minus => "'-'".into(),
            Token::Star => "'*'".into(),
            Token::Slash => "'/'".into(),
            Token::Caret => "'^'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn parse_error(offset: usize, expected: &[&str], found: String) -> Error {
    Error::Parse {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

const ATOM_START: &[&str] = &["number", "'i'", "z<k>", "w<k>", "'conj'", "'('", "'-'"];

fn lex(text: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let ch = bytes[pos];
        if ch.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let simple = match ch {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            tokens.push((start, tok));
            pos += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == b'.' {
            while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
                pos += 1;
            }
            if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                let mut look = pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    pos = look;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let lexeme = &text[start..pos];
            let is_int = lexeme.bytes().all(|b| b.is_ascii_digit());
            let tok = if is_int {
                match lexeme.parse::<u32>() {
                    Ok(v) => Token::Int(v),
                    Err(_) => Token::Num(
                        lexeme
                            .parse::<f64>()
                            .map_err(|_| parse_error(start, &["number"], format!("{lexeme:?}")))?,
                    ),
                }
            } else {
                Token::Num(
                    lexeme
                        .parse::<f64>()
                        .map_err(|_| parse_error(start, &["number"], format!("{lexeme:?}")))?,
                )
            };
            tokens.push((start, tok));
            continue;
        }
        if ch.is_ascii_alphabetic() {
            while pos < bytes.len() && bytes[pos].is_ascii_alphanumeric() {
                pos += 1;
            }
            let word = &text[start..pos];
            let tok = match word {
                "i" => Token::I,
                "conj" => Token::Conj,
                _ => {
                    let (head, digits) = word.split_at(1);
                    let index = if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
                    {
                        digits.parse::<usize>().ok()
                    } else {
                        None
                    };
                    match (head, index) {
                        ("z", Some(k)) => Token::Z(k),
                        ("w", Some(k)) => Token::W(k),
                        _ => {
                            return Err(parse_error(
                                start,
                                &["z<k>", "w<k>", "'i'", "'conj'"],
                                format!("{word:?}"),
                            ))
                        }
                    }
                }
            };
            tokens.push((start, tok));
            continue;
        }
        let found = text[start..]
            .chars()
            .next()
            .map(|c| format!("{c:?}"))
            .unwrap_or_default();
        return Err(parse_error(start, ATOM_START, found));
    }
    tokens.push((text.len(), Token::End));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].1.clone();
        if tok != Token::End {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &[&str]) -> Error {
        parse_error(self.offset(), expected, self.peek().describe())
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while *self.peek() == Token::Caret {
            self.bump();
            match self.peek().clone() {
                Token::Int(p) => {
                    self.bump();
                    base = Expr::Pow(Box::new(base), p);
                }
                _ => return Err(self.error(&["nonnegative integer"])),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Token::Num(x) => {
                self.bump();
                Ok(Expr::num(x))
            }
            Token::Int(x) => {
                self.bump();
                Ok(Expr::num(x as f64))
            }
            Token::I => {
                self.bump();
                Ok(Expr::Num(C64::new(0.0, 1.0)))
            }
            Token::Z(k) | Token::W(k) if k == 0 => Err(Error::IndexOutOfRange { index: 0, dim: 0 }),
            Token::Z(k) => {
                self.bump();
                Ok(Expr::Z(k - 1))
            }
            Token::W(k) => {
                self.bump();
                Ok(Expr::W(k - 1))
            }
            Token::Conj => {
                self.bump();
                self.expect(Token::LParen, "'('")?;
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(Expr::Conj(Box::new(inner)))
            }
            Token::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            _ => Err(self.error(ATOM_START)),
        }
    }

    fn expect(&mut self, tok: Token, label: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[label]))
        }
    }
}

/// Parses an expression without a dimension check.
pub fn parse(text: &str) -> Result<Expr> {
    let mut parser = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(parser.error(&["'+'", "'-'", "'*'", "'/'", "'^'", "end of input"]));
    }
    Ok(expr)
}

/// Parses and checks every symbol index is at most `dim`.
pub fn parse_for_dim(text: &str, dim: usize) -> Result<Expr> {
    let expr = parse(text)?;
    expr.check_dim(dim)?;
    Ok(expr)
}

//! Recursive-descent parser for scale expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' int)?
//! atom   := number | 'x' | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos'
//! int    := '-'? digits | '(' '-'? digits ')'
//! ```

use super::expr::{self, Expr};
use super::ScaleError;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

pub fn parse_expr(src: &str) -> Result<Expr, ScaleError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ScaleError {
        ScaleError::Parse {
            input: self.src.to_string(),
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ScaleError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ScaleError> {
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

    fn term(&mut self) -> Result<Expr, ScaleError> {
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

    fn unary(&mut self) -> Result<Expr, ScaleError> {
        if self.eat('-') {
            Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ScaleError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let paren = self.eat('(');
        let negative = self.eat('-');
        self.skip_ws();
        let digits = self.rest().chars().take_while(char::is_ascii_digit).count();
        if digits == 0 {
            return Err(self.error("expected an integer exponent"));
        }
        let k: i32 = self.rest()[..digits]
            .parse()
            .map_err(|_| self.error("exponent out of range"))?;
        self.pos += digits;
        if paren {
            self.expect(')')?;
        }
        Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Expr, ScaleError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let len = self
                    .rest()
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .count();
                let ident = &self.rest()[..len];
                let start = self.pos;
                self.pos += len;
                match ident {
                    "x" => Ok(Expr::X),
                    "t" => Ok(Expr::T),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "sin" | "cos" => {
                        self.expect('(')?;
                        let arg = Box::new(self.expr()?);
                        self.expect(')')?;
                        Ok(if ident == "sin" {
                            Expr::Sin(arg)
                        } else {
                            Expr::Cos(arg)
                        })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{ident}'")))
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr, ScaleError> {
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut end = 0;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            let digits_start = k;
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            if k > digits_start {
                end = k;
            }
        }
        let value: f64 = rest[..end]
            .parse()
            .map_err(|_| self.error("malformed number"))?;
        self.pos += end;
        Ok(Expr::Const(value))
    }
}

/// Folds constant subtrees produced by parsing (`2*pi` and the like).
pub(crate) fn fold_constants(e: Expr) -> Expr {
    match e {
        Expr::Neg(a) => expr::neg(fold_constants(*a)),
        Expr::Add(a, b) => expr::add(fold_constants(*a), fold_constants(*b)),
        Expr::Sub(a, b) => expr::sub(fold_constants(*a), fold_constants(*b)),
        Expr::Mul(a, b) => expr::mul(fold_constants(*a), fold_constants(*b)),
        Expr::Div(a, b) => match (fold_constants(*a), fold_constants(*b)) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x / y),
            (a, b) => expr::div(a, b),
        },
        Expr::Pow(a, k) => expr::pow(fold_constants(*a), k),
        Expr::Sin(a) => match fold_constants(*a) {
            Expr::Const(c) => Expr::Const(c.sin()),
            a => Expr::Sin(Box::new(a)),
        },
        Expr::Cos(a) => match fold_constants(*a) {
            Expr::Const(c) => Expr::Const(c.cos()),
            a => Expr::Cos(Box::new(a)),
        },
        leaf => leaf,
    }
}

//! Recursive-descent parser for the coordinate expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := integer | identifier | function '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! A rational literal `p/q` is read as the quotient of two integer factors,
//! which denotes the same value.

use num::bigint::BigInt;
use num::rational::BigRational;

use super::expr::{Expr, Func};
use super::ExprError;

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    coords: Option<&'a [String]>,
}

/// Parses `text` and returns the canonical expression.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    parse_raw(text, None).map(|e| e.canonical())
}

/// Like [`parse`] but rejects identifiers that are not among `coords`.
pub fn parse_in_chart(text: &str, coords: &[String]) -> Result<Expr, ExprError> {
    parse_raw(text, Some(coords)).map(|e| e.canonical())
}

/// Parses without canonicalizing.
pub fn parse_raw(text: &str, coords: Option<&[String]>) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text, bytes: text.as_bytes(), pos: 0, coords };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(-self.term()?);
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms.into()) })
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                acc = Expr::Product(vec![acc, rhs].into());
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                acc = Expr::Quotient(acc.into(), rhs.into());
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.base()?;
        if self.eat(b'^') {
            let negative = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            let digits = self.digits();
            if digits.is_empty() {
                return Err(self.error("expected integer exponent"));
            }
            if self.bytes.get(self.pos) == Some(&b'.') {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: "only integer exponents are supported".into(),
                });
            }
            let k: i64 = digits.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })?;
            let k = if negative { -k } else { k };
            return Ok(Expr::IntPower(base.into(), k));
        }
        Ok(base)
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.base()?)
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                let digits = self.digits();
                if self.bytes.get(self.pos) == Some(&b'.') {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: "decimal literals are not supported; use p/q".into(),
                    });
                }
                let n: BigInt = digits.parse().expect("digit string");
                Ok(Expr::rational(BigRational::from_integer(n)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if self.peek() == Some(b'(') {
                    let f = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
                        name: name.to_string(),
                        offset: start,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.error("expected ')' after function argument"));
                    }
                    return Ok(Expr::func(f, arg));
                }
                if Func::from_name(name).is_some() {
                    return Err(ExprError::Syntax {
                        offset: self.pos,
                        message: format!("function `{name}` requires an argument"),
                    });
                }
                if let Some(coords) = self.coords {
                    if !coords.iter().any(|c| c == name) {
                        return Err(ExprError::UnknownCoordinate(name.to_string()));
                    }
                }
                Ok(Expr::var(name))
            }
            Some(c) => Err(self.error(&format!("unexpected character `{}`", c as char))),
        }
    }
}

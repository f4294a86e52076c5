use crate::error::ParseError;

use super::{Expr, Func};

/// Recursive-descent parser over the raw bytes of the input.
pub(super) struct Parser<'a> {
    src: &'a str,
    pos: usize,
    allowed: Option<&'a [&'a str]>,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, allowed: Option<&'a [&'a str]>) -> Self {
        Self { src, pos: 0, allowed }
    }

    pub(super) fn parse(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.error_at(self.pos, "unexpected trailing input"));
        }
        Ok(e)
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError { offset, message: message.into() }
    }

    fn bytes(&self) -> &[u8] {
        self.src.as_bytes()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    // expr = term { ("+" | "-") term }
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // term = unary { ("*" | "/") unary }
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // unary = "-" unary | power
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    // power = atom [ "^" unary ], the exponent folding to an integer constant
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let exponent = self.unary()?;
        let value = exponent
            .constant_value()
            .ok_or_else(|| self.error_at(at, "exponent must be a constant integer"))?;
        if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
            return Err(self.error_at(at, format!("exponent {value} is not an integer")));
        }
        Ok(Expr::Pow(Box::new(base), value as i32))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(c) = self.peek() else {
            return Err(self.error_at(self.pos, "unexpected end of input"));
        };
        let start = self.pos;
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error_at(self.pos, "expected `)`"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.bytes()[self.pos].is_ascii_alphanumeric() || self.bytes()[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            if self.peek() == Some(b'(') {
                let func = Func::from_name(name)
                    .ok_or_else(|| self.error_at(start, format!("unknown function `{name}`")))?;
                self.pos += 1;
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error_at(self.pos, "expected `)`"));
                }
                return Ok(Expr::Call(func, Box::new(arg)));
            }
            if name == "pi" {
                return Ok(Expr::Num(std::f64::consts::PI));
            }
            if Func::from_name(name).is_some() {
                return Err(self.error_at(start, format!("function `{name}` needs an argument")));
            }
            if let Some(allowed) = self.allowed {
                if !allowed.contains(&name) {
                    return Err(self.error_at(
                        start,
                        format!("unknown variable `{name}` (allowed: {})", allowed.join(", ")),
                    ));
                }
            }
            return Ok(Expr::Var(name.to_string()));
        }
        Err(self.error_at(start, format!("unexpected character `{}`", c as char)))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let b = self.bytes();
        let mut end = start;
        while end < b.len() && b[end].is_ascii_digit() {
            end += 1;
        }
        if end < b.len() && b[end] == b'.' {
            end += 1;
            while end < b.len() && b[end].is_ascii_digit() {
                end += 1;
            }
        }
        if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
            let mut e = end + 1;
            if e < b.len() && (b[e] == b'+' || b[e] == b'-') {
                e += 1;
            }
            if e < b.len() && b[e].is_ascii_digit() {
                while e < b.len() && b[e].is_ascii_digit() {
                    e += 1;
                }
                end = e;
            }
        }
        let text = &self.src[start..end];
        let value: f64 =
            text.parse().map_err(|_| self.error_at(start, format!("malformed number `{text}`")))?;
        self.pos = end;
        Ok(Expr::Num(value))
    }
}

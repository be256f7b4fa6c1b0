//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ('-')? base ('^' integer)?
//! base   := number | ident | '(' expr ')' | ('exp'|'sqrt') '(' expr ')'
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Expr, Func};
use crate::error::{Error, Result};

/// Parse `text`, accepting only variables listed in `allowed_vars`.
pub fn parse(text: &str, allowed_vars: &[&str]) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        allowed: allowed_vars,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error(&format!("unexpected `{}`", p.peek_char())));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    allowed: &'a [&'a str],
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        self.peek().map_or('?', char::from)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            position: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else if self.at_end() {
            Err(self.error(&format!("expected `{}`, found end of input", c as char)))
        } else {
            Err(self.error(&format!("expected `{}`, found `{}`", c as char, self.peek_char())))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(lhs.into(), self.term()?.into());
            } else if self.eat(b'-') {
                lhs = Expr::Add(lhs.into(), Expr::Neg(self.term()?.into()).into());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(lhs.into(), self.factor()?.into());
            } else if self.eat(b'/') {
                let start = self.pos;
                let rhs = self.factor()?;
                if rhs.is_zero() {
                    self.pos = start;
                    return Err(self.error("division by the literal zero"));
                }
                lhs = Expr::Div(lhs.into(), rhs.into());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let negate = self.eat(b'-');
        let mut e = self.base()?;
        if self.eat(b'^') {
            self.skip_ws();
            let n = self.integer_exponent()?;
            e = Expr::Pow(e.into(), n);
        }
        Ok(if negate { Expr::Neg(e.into()) } else { e })
    }

    fn integer_exponent(&mut self) -> Result<i32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        digits.parse::<i32>().map_err(|_| Error::Syntax {
            position: start + 1,
            message: format!("exponent `{digits}` out of range"),
        })
    }

    fn base(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident_or_call(),
            Some(_) => Err(self.error(&format!("unexpected `{}`", self.peek_char()))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut int_part = BigInt::zero();
        let mut digits = 0usize;
        while let Some(c) = self.peek().filter(u8::is_ascii_digit) {
            int_part = int_part * 10 + (c - b'0');
            self.pos += 1;
            digits += 1;
        }
        let mut value = BigRational::from_integer(int_part);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let mut scale = BigInt::one();
            let mut frac = BigInt::zero();
            while let Some(c) = self.peek().filter(u8::is_ascii_digit) {
                frac = frac * 10 + (c - b'0');
                scale *= 10;
                self.pos += 1;
                digits += 1;
            }
            value += BigRational::new(frac, scale);
        }
        if digits == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        Ok(Expr::Const(value))
    }

    fn ident_or_call(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
        let func = match name {
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        if let Some(func) = func {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Call(func, arg.into()));
        }
        if !self.allowed.contains(&name) {
            return Err(Error::UnknownVariable(name.to_string()));
        }
        Ok(Expr::Var(name.to_string()))
    }
}

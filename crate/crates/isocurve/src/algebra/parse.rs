//! Recursive-descent parser for rational-function expressions.
//!
//! Grammar (whitespace insignificant, integers arbitrary precision):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' uint)?
//! base   := int | name | '(' expr ')' | '-' base
//! ```
//!
//! Note the grammar binds `^` to the full `base`, so a leading unary minus
//! is raised with it: `-x^2` denotes `(-x)^2`. The polynomial printer avoids
//! emitting that shape, so print/parse round-trips.

use num_bigint::BigInt;
use std::sync::Arc;

use crate::algebra::ratfun::RationalFunction;
use crate::algebra::scalar::Domain;
use crate::error::Error;

pub fn parse_expression(
    text: &str,
    variables: &Arc<[String]>,
    domain: Domain,
) -> Result<RationalFunction, Error> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        domain,
        vars: variables,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(v)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    domain: Domain,
    vars: &'a Arc<[String]>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .map(|b| b.is_ascii_whitespace())
            .unwrap_or(false)
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<RationalFunction, Error> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RationalFunction, Error> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                Some(b'/') => {
                    let at = self.pos;
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = acc.div(&rhs).map_err(|_| Error::Parse {
                        position: at,
                        message: "division by the zero polynomial".to_string(),
                    })?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RationalFunction, Error> {
        let b = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.uint()?;
            return Ok(b.pow(e));
        }
        Ok(b)
    }

    fn base(&mut self) -> Result<RationalFunction, Error> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.base()?.neg())
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(RationalFunction::constant(
                    self.domain,
                    self.vars,
                    self.domain.from_bigint(&n),
                ))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.name();
                if !self.vars.iter().any(|v| v == &name) {
                    return Err(Error::Parse {
                        position: start,
                        message: format!("unknown variable `{name}`"),
                    });
                }
                Ok(RationalFunction::variable(self.domain, self.vars, &name))
            }
            Some(_) => Err(self.err("expected integer, name, '(', or '-'")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<BigInt, Error> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map(|b| b.is_ascii_digit())
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected integer"));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        Ok(s.parse::<BigInt>().expect("digit string"))
    }

    fn uint(&mut self) -> Result<u32, Error> {
        self.skip_ws();
        let start = self.pos;
        let n = self.integer()?;
        u32::try_from(n).map_err(|_| Error::Parse {
            position: start,
            message: "exponent too large".to_string(),
        })
    }

    fn name(&mut self) -> String {
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map(|b| b.is_ascii_alphanumeric() || *b == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }
}

//! Infix expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | call | '(' expr ')'
//! call    := name '(' args ')'                 sin cos exp ln sqrt or opaque
//!          | name "'"+ '(' arg ')'             derivatives of a unary opaque
//!          | name '[' int (',' int)* ']' '(' args ')'
//! ```
//!
//! Numbers are exact: `3/2` is a rational, `0.25` is parsed as `1/4`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;

use super::atom::{Atom, VariableSpace};
use super::expr::{Elementary, Expr, OpaqueCall, Rational};
use super::SymError;

/// Maps identifiers to atoms.
pub trait AtomResolver {
    fn resolve(&self, name: &str) -> Option<Atom>;
}

impl AtomResolver for VariableSpace {
    fn resolve(&self, name: &str) -> Option<Atom> {
        self.lookup(name)
    }
}

/// Resolves every identifier to a free atom.
pub struct FreeAtoms;

impl AtomResolver for FreeAtoms {
    fn resolve(&self, name: &str) -> Option<Atom> {
        Some(Atom::free(name))
    }
}

pub fn parse(text: &str, resolver: &dyn AtomResolver) -> Result<Expr, SymError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, resolver, text };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(p.error_at(tok, "unexpected token"));
    }
    Ok(e)
}

pub fn parse_free(text: &str) -> Result<Expr, SymError> {
    parse(text, &FreeAtoms)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Prime,
    Op(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
    len: usize,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, col)
}

fn parse_error(text: &str, offset: usize, token: &str, message: &str) -> SymError {
    let (line, column) = position(text, offset);
    SymError::Parse { line, column, token: token.to_string(), message: message.to_string() }
}

fn tokenize(text: &str) -> Result<Vec<Token>, SymError> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let (off, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|(_, d)| d.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                i += 1;
            }
            let int_end = i;
            let mut frac_digits = String::new();
            if i < bytes.len() && bytes[i].1 == '.' {
                i += 1;
                while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                    frac_digits.push(bytes[i].1);
                    i += 1;
                }
            }
            let int_part: String = bytes[start..int_end].iter().map(|(_, c)| c).collect();
            let mut value = if int_part.is_empty() {
                Rational::zero()
            } else {
                Rational::from_integer(int_part.parse::<BigInt>().unwrap())
            };
            if !frac_digits.is_empty() {
                let denom = BigInt::from(10u32).pow(frac_digits.len() as u32);
                value += Rational::new(frac_digits.parse::<BigInt>().unwrap(), denom);
            }
            let end = bytes.get(i).map(|(o, _)| *o).unwrap_or(text.len());
            out.push(Token { tok: Tok::Num(value), offset: off, len: end - off });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].1.is_ascii_alphanumeric() || bytes[i].1 == '_') {
                i += 1;
            }
            let name: String = bytes[start..i].iter().map(|(_, c)| c).collect();
            out.push(Token { tok: Tok::Ident(name.clone()), offset: off, len: name.len() });
            continue;
        }
        match c {
            '+' | '-' | '*' | '/' | '^' | '(' | ')' | ',' | '[' | ']' => {
                out.push(Token { tok: Tok::Op(c), offset: off, len: 1 });
            }
            '\'' => out.push(Token { tok: Tok::Prime, offset: off, len: 1 }),
            _ => return Err(parse_error(text, off, &c.to_string(), "unexpected character")),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    resolver: &'a dyn AtomResolver,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self, op: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Op(c), .. }) if *c == op)
    }

    fn error_at(&self, tok: &Token, message: &str) -> SymError {
        let snippet = &self.text[tok.offset..tok.offset + tok.len];
        parse_error(self.text, tok.offset, snippet, message)
    }

    fn error_eof(&self, message: &str) -> SymError {
        parse_error(self.text, self.text.len(), "<end>", message)
    }

    fn expect_op(&mut self, op: char) -> Result<(), SymError> {
        match self.peek() {
            Some(Token { tok: Tok::Op(c), .. }) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some(tok) => Err(self.error_at(tok, &format!("expected `{op}`"))),
            None => Err(self.error_eof(&format!("expected `{op}`"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, SymError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                terms.push(self.term()?);
            } else if self.peek_op('-') {
                self.pos += 1;
                terms.push(-self.term()?);
            } else {
                return Ok(Expr::sum(terms));
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SymError> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                factors.push(self.unary()?);
            } else if self.peek_op('/') {
                self.pos += 1;
                factors.push(self.unary()?.recip());
            } else {
                return Ok(Expr::product(factors));
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SymError> {
        if self.peek_op('-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        if self.peek_op('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SymError> {
        let base = self.primary()?;
        if self.peek_op('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>, SymError> {
        self.expect_op('(')?;
        let mut args = vec![self.expr()?];
        while self.peek_op(',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect_op(')')?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, SymError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.error_eof("expected an expression")),
        };
        self.pos += 1;
        match &tok.tok {
            Tok::Num(q) => Ok(Expr::Num(q.clone())),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.named(name, &tok),
            _ => Err(self.error_at(&tok, "expected an expression")),
        }
    }

    fn named(&mut self, name: &str, tok: &Token) -> Result<Expr, SymError> {
        let mut primes = 0u32;
        while matches!(self.peek(), Some(Token { tok: Tok::Prime, .. })) {
            self.pos += 1;
            primes += 1;
        }
        let mut multi_index = None;
        if primes == 0 && self.peek_op('[') {
            self.pos += 1;
            let mut idx = Vec::new();
            loop {
                match self.peek().cloned() {
                    Some(Token { tok: Tok::Num(q), .. }) if q.is_integer() && q >= Rational::zero() => {
                        use num_traits::ToPrimitive;
                        self.pos += 1;
                        idx.push(q.to_integer().to_u32().unwrap_or(u32::MAX));
                    }
                    Some(t) => return Err(self.error_at(&t, "expected a derivative count")),
                    None => return Err(self.error_eof("expected a derivative count")),
                }
                if self.peek_op(',') {
                    self.pos += 1;
                    continue;
                }
                self.expect_op(']')?;
                break;
            }
            multi_index = Some(idx);
        }
        let is_call = self.peek_op('(');
        if !is_call {
            if primes > 0 || multi_index.is_some() {
                return Err(self.error_at(tok, "derivative notation requires an argument list"));
            }
            return self
                .resolver
                .resolve(name)
                .map(Expr::Atom)
                .ok_or_else(|| self.error_at(tok, "undeclared atom"));
        }
        let args = self.args()?;
        if let Some(f) = Elementary::from_name(name) {
            if primes > 0 || multi_index.is_some() {
                return Err(self.error_at(tok, "derivative notation applies to opaque functions only"));
            }
            if args.len() != 1 {
                return Err(self.error_at(tok, "elementary functions take one argument"));
            }
            return Ok(Expr::func(f, args.into_iter().next().unwrap()));
        }
        let derivs = match multi_index {
            Some(idx) => {
                if idx.len() != args.len() {
                    return Err(self.error_at(tok, "derivative index length differs from argument count"));
                }
                idx
            }
            None if primes > 0 => {
                if args.len() != 1 {
                    return Err(self.error_at(tok, "prime notation applies to unary functions only"));
                }
                vec![primes]
            }
            None => vec![0; args.len()],
        };
        Ok(Expr::Opaque(Arc::new(OpaqueCall { name: Arc::from(name), args, derivs })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decimal_literals() {
        assert_eq!(parse_free("0.25").unwrap(), Expr::Num(Rational::new(1.into(), 4.into())));
    }

    #[test]
    fn reports_position() {
        let err = parse_free("x + \n  y $").unwrap_err();
        match err {
            SymError::Parse { line, column, token, .. } => {
                assert_eq!((line, column, token.as_str()), (2, 5, "$"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_atom() {
        let space = VariableSpace::new(&["x"]).unwrap();
        let err = parse("x + phi", &space).unwrap_err();
        assert!(matches!(err, SymError::Parse { ref token, .. } if token == "phi"));
    }

    #[test]
    fn opaque_derivative_forms() {
        let e = parse_free("T''(t) + f[1,0](t, x)").unwrap();
        let calls = e.opaque_calls();
        assert!(calls.iter().any(|c| &*c.name == "T" && c.derivs == vec![2]));
        assert!(calls.iter().any(|c| &*c.name == "f" && c.derivs == vec![1, 0]));
        assert!(parse_free("T'").is_err());
        assert!(parse_free("sin'(x)").is_err());
    }
}

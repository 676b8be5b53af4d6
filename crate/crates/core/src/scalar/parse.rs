//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' signed-integer)?
//! base   := rational | identifier | identifier '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! A rational literal is `int` or `int/int` with no whitespace around the slash.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::chart::Chart;
use super::expr::{ScalarExpr, Symbol};
use super::opaque::OpaqueRegistry;
use super::ScalarError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Rational(BigRational),
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn digits(&mut self) -> Option<BigInt> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse().ok()
    }

    fn next(&mut self) -> Result<(usize, Tok), ScalarError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let at = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((at, Tok::End));
        };
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                let n = self.digits().unwrap();
                // int '/' int with no whitespace is a single rational literal.
                if self.src.get(self.pos) == Some(&b'/')
                    && self
                        .src
                        .get(self.pos + 1)
                        .is_some_and(|b| b.is_ascii_digit())
                {
                    let save = self.pos;
                    self.pos += 1;
                    let d = self.digits().unwrap();
                    if d.is_zero() {
                        self.pos = save;
                        return Err(ScalarError::Syntax {
                            offset: save + 1,
                            message: "zero denominator in rational literal".into(),
                        });
                    }
                    return Ok((at, Tok::Rational(BigRational::new(n, d))));
                }
                return Ok((at, Tok::Int(n)));
            }
            c if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                return Ok((at, Tok::Ident(s.to_string())));
            }
            _ => {
                return Err(ScalarError::Syntax {
                    offset: at,
                    message: format!("unexpected character {:?}", c as char),
                })
            }
        };
        self.pos += 1;
        Ok((at, tok))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(usize, Tok)>,
    chart: &'a Chart,
    registry: &'a OpaqueRegistry,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&(usize, Tok), ScalarError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    fn bump(&mut self) -> Result<(usize, Tok), ScalarError> {
        self.peek()?;
        Ok(self.peeked.take().unwrap())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ScalarError> {
        let (at, tok) = self.bump()?;
        if tok == want {
            Ok(())
        } else {
            Err(ScalarError::Syntax {
                offset: at,
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ScalarError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek()?.1 {
                Tok::Plus => {
                    self.bump()?;
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump()?;
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(ScalarExpr::sum(terms))
    }

    fn term(&mut self) -> Result<ScalarExpr, ScalarError> {
        let mut factors = vec![self.factor()?];
        loop {
            match self.peek()?.1 {
                Tok::Star => {
                    self.bump()?;
                    factors.push(self.factor()?);
                }
                Tok::Slash => {
                    self.bump()?;
                    factors.push(self.factor()?.recip());
                }
                _ => break,
            }
        }
        Ok(ScalarExpr::product(factors))
    }

    fn factor(&mut self) -> Result<ScalarExpr, ScalarError> {
        let base = self.base()?;
        if self.peek()?.1 != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let (at, tok) = self.bump()?;
        let (neg, tok, at) = if tok == Tok::Minus {
            let (at2, t2) = self.bump()?;
            (true, t2, at2)
        } else {
            (false, tok, at)
        };
        let Tok::Int(n) = tok else {
            return Err(ScalarError::Syntax {
                offset: at,
                message: "expected integer exponent".into(),
            });
        };
        let n: i64 = i64::try_from(n).map_err(|_| ScalarError::Syntax {
            offset: at,
            message: "exponent out of range".into(),
        })?;
        let n = if neg { -n } else { n };
        // Keep the power node even for exponents 0 and 1 so the tree mirrors the text.
        Ok(ScalarExpr::from_node(super::expr::Node::Pow(base, n)))
    }

    fn base(&mut self) -> Result<ScalarExpr, ScalarError> {
        let (at, tok) = self.bump()?;
        match tok {
            Tok::Int(n) => Ok(ScalarExpr::constant(BigRational::from_integer(n))),
            Tok::Rational(q) => Ok(ScalarExpr::constant(q)),
            Tok::Minus => Ok(-self.base()?),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek()?.1 == Tok::LParen {
                    let Some(func) = self.registry.get(&name).cloned() else {
                        return Err(ScalarError::UnknownIdentifier { name, offset: at });
                    };
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(ScalarExpr::apply(&func, arg));
                }
                let sym = Symbol::new(&name);
                if self.chart.contains(&sym) {
                    Ok(ScalarExpr::var(&sym))
                } else {
                    Err(ScalarError::UnknownIdentifier { name, offset: at })
                }
            }
            Tok::End => Err(ScalarError::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            other => Err(ScalarError::Syntax {
                offset: at,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// Parses `text` with identifiers resolved against `chart` and `registry`.
pub fn parse_expr(
    text: &str,
    chart: &Chart,
    registry: &OpaqueRegistry,
) -> Result<ScalarExpr, ScalarError> {
    let mut p = Parser {
        lexer: Lexer {
            src: text.as_bytes(),
            pos: 0,
        },
        peeked: None,
        chart,
        registry,
    };
    let e = p.expr()?;
    let (at, tok) = p.bump()?;
    if tok != Tok::End {
        return Err(ScalarError::Syntax {
            offset: at,
            message: "trailing input".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::expr::Node;

    fn chart() -> Chart {
        Chart::new(&["x1", "x2", "x3", "x4", "x5", "th"]).unwrap()
    }

    fn reg() -> OpaqueRegistry {
        let mut r = OpaqueRegistry::with_builtins();
        let s = Symbol::new("s");
        let body = ScalarExpr::var(&s).pow(2);
        r.register(crate::scalar::OpaqueFn::from_body("a", &s, &body).unwrap());
        r
    }

    #[test]
    fn parses_opaque_application() {
        let e = parse_expr("th^3 - 3*th*a(x1)", &chart(), &reg()).unwrap();
        let Node::Sum(ts) = e.node() else {
            panic!("expected sum, got {e:?}")
        };
        assert_eq!(ts.len(), 2);
        assert!(matches!(ts[0].node(), Node::Pow(_, 3)));
        assert!(e.has_opaque());
    }

    #[test]
    fn parses_polynomial_component() {
        let e = parse_expr("x3*th - 2*x2*(th^2) + x1*th^3", &chart(), &reg()).unwrap();
        assert!(!e.has_opaque());
        assert_eq!(e.variables().len(), 4);
    }

    #[test]
    fn dangling_operator_reports_offset() {
        let err = parse_expr("x1 +", &chart(), &reg()).unwrap_err();
        assert!(
            matches!(err, ScalarError::Syntax { offset: 4, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn unknown_identifier_is_named() {
        let err = parse_expr("x1 + q", &chart(), &reg()).unwrap_err();
        match err {
            ScalarError::UnknownIdentifier { name, offset } => {
                assert_eq!(name, "q");
                assert_eq!(offset, 5);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_expr("b(th)", &chart(), &reg()),
            Err(ScalarError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn rational_literal_binds_before_power() {
        let e = parse_expr("2/3^2", &chart(), &reg()).unwrap();
        let v = crate::scalar::normalize(&e).unwrap();
        assert_eq!(
            v.as_constant().unwrap(),
            &BigRational::new(4.into(), 9.into())
        );
        let e = parse_expr("2 / 3^2", &chart(), &reg()).unwrap();
        let v = crate::scalar::normalize(&e).unwrap();
        assert_eq!(
            v.as_constant().unwrap(),
            &BigRational::new(2.into(), 9.into())
        );
    }

    #[test]
    fn unary_minus_binds_tighter_than_power() {
        let e = parse_expr("-x1^2", &chart(), &reg()).unwrap();
        let x = parse_expr("x1*x1", &chart(), &reg()).unwrap();
        assert_eq!(
            crate::scalar::normalize(&e).unwrap(),
            crate::scalar::normalize(&x).unwrap()
        );
    }

    #[test]
    fn negated_terms_survive_a_round_trip() {
        for text in [
            "x1 + -1/(2 + x2^2) - 1/2",
            "x1 - (x2 + x1)",
            "-(x1 + x2)*x1 - -2*x1",
        ] {
            let once = parse_expr(text, &chart(), &reg()).unwrap();
            let twice = parse_expr(&once.to_string(), &chart(), &reg()).unwrap();
            assert_eq!(once, twice, "{text} printed as {once}");
        }
    }
}

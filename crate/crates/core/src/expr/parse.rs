//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr     := term (("+" | "-") term)*
//! term     := unary (("*" | "/") unary)*
//! unary    := "-" unary | power
//! power    := primary ("^" exponent)*
//! exponent := "-"? primary            (must fold to an integer >= 0)
//! primary  := number | "x" digits | ("sin" | "cos" | "exp") "(" expr ")" | "(" expr ")"
//! ```

use super::{Expression, Node};
use crate::error::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ExprError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let done = t.1 == Tok::End;
            out.push(t);
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(usize, Tok), ExprError> {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((start, Tok::End));
        };
        if c.is_ascii_digit() || c == '.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() {
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            return Ok((start, Tok::Ident(self.src[start..self.pos].to_string())));
        }
        if "+-*/^()".contains(c) {
            self.pos += 1;
            return Ok((start, Tok::Sym(c)));
        }
        Err(ExprError::Syntax {
            offset: start,
            message: format!("unexpected character '{c}'"),
        })
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok), ExprError> {
        let bytes = self.src.as_bytes();
        let digits = |lx: &mut Self| {
            while lx.pos < bytes.len() && bytes[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(|v| (start, Tok::Num(v)))
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number '{text}'"),
            })
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    dimension: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn offset(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{c}'")))
        }
    }

    fn syntax(&self, message: String) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expression::new(Node::Add(lhs, self.term()?));
            } else if self.eat('-') {
                lhs = Expression::new(Node::Sub(lhs, self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expression::new(Node::Mul(lhs, self.unary()?));
            } else if self.eat('/') {
                lhs = Expression::new(Node::Div(lhs, self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(negate(inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let mut base = self.primary()?;
        while self.eat('^') {
            let at = self.offset();
            let negative = self.eat('-');
            let e = self.primary()?;
            let value = match (e.max_var(), e.eval(&[])) {
                (None, Ok(v)) => v,
                _ => {
                    return Err(ExprError::BadExponent {
                        offset: at,
                        message: "exponent must be a constant".into(),
                    })
                }
            };
            let value = if negative { -value } else { value };
            if value < 0.0 || value.fract() != 0.0 || value > f64::from(u16::MAX) {
                return Err(ExprError::BadExponent {
                    offset: at,
                    message: format!("exponent {value} is not a nonnegative integer"),
                });
            }
            base = Expression::new(Node::Pow(base, value as u32));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ExprError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expression::constant(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "sin" | "cos" | "exp" => {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Expression::new(match name.as_str() {
                        "sin" => Node::Sin(arg),
                        "cos" => Node::Cos(arg),
                        _ => Node::Exp(arg),
                    }))
                }
                _ => {
                    let index = name
                        .strip_prefix('x')
                        .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                        .and_then(|d| d.parse::<usize>().ok())
                        .ok_or_else(|| ExprError::Syntax {
                            offset: at,
                            message: format!("unknown identifier '{name}'"),
                        })?;
                    if index >= self.dimension {
                        return Err(ExprError::VariableOutOfRange {
                            index,
                            dimension: self.dimension,
                        });
                    }
                    Ok(Expression::var(index))
                }
            },
            Tok::End => Err(ExprError::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(ExprError::Syntax {
                offset: at,
                message: format!("unexpected '{c}'"),
            }),
        }
    }
}

fn negate(e: Expression) -> Expression {
    match e.as_const() {
        Some(c) => Expression::constant(-c),
        None => Expression::new(Node::Mul(Expression::constant(-1.0), e)),
    }
}

/// Parses `text` as a function of the coordinates `x0 .. x{dimension-1}`.
pub fn parse(text: &str, dimension: usize) -> Result<Expression, ExprError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        dimension,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.syntax("trailing input".into()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, p: &[f64]) -> f64 {
        parse(text, p.len().max(1)).unwrap().eval(p).unwrap()
    }

    #[test]
    fn builds_circle_ast() {
        let e = parse("x0^2 + x1^2 - 1", 2).unwrap();
        let want = Node::Sub(
            Expression::new(Node::Add(
                Expression::new(Node::Pow(Expression::var(0), 2)),
                Expression::new(Node::Pow(Expression::var(1), 2)),
            )),
            Expression::constant(1.0),
        );
        assert_eq!(*e.node(), want);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("-2^2", &[0.0]), -4.0);
        assert_eq!(ev("2 - 3 - 4", &[0.0]), -5.0);
        assert_eq!(ev("8 / 4 / 2", &[0.0]), 1.0);
        assert_eq!(ev("2 * 3 + 4 * 5", &[0.0]), 26.0);
        assert_eq!(ev("2^3^2", &[0.0]), 64.0);
        assert_eq!(ev("-x0 * 3", &[2.0]), -6.0);
        assert_eq!(ev("x0^(1+1)", &[3.0]), 9.0);
        assert_eq!(ev("1.5e2 + .5", &[0.0]), 150.5);
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        match parse("((x0", 2) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_variable() {
        assert!(matches!(
            parse("x3", 2),
            Err(ExprError::VariableOutOfRange {
                index: 3,
                dimension: 2
            })
        ));
    }

    #[test]
    fn rejects_bad_exponents() {
        for text in ["x0^-1", "x0^2.5", "x0^x1"] {
            assert!(
                matches!(parse(text, 2), Err(ExprError::BadExponent { .. })),
                "{text}"
            );
        }
    }

    #[test]
    fn misc_syntax_errors() {
        for text in ["", "x0 +", "foo(x0)", "x0 x1", "3 $ 4", "sin x0"] {
            assert!(matches!(parse(text, 2), Err(ExprError::Syntax { .. })), "{text}");
        }
    }
}

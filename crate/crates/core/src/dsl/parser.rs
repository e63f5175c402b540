//! Recursive-descent parser for condition expressions.
//!
//! Binding strength, tightest first:
//!
//! ```text
//! unary  -  |  * /  |  + -  |  == != < <= > >=  |  not  |  and  |  or
//! ```
//!
//! Comparisons do not chain. A minus sign written directly before a numeric
//! literal folds into a negative literal.

use thiserror::Error;

use super::ast::{BinaryOp, Expr, UnaryOp, Value};
use super::lexer::{self, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset} (expected {})", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub message: String,
}

pub fn parse(tokens: &[Token]) -> Result<Expr, ParseError> {
    let end = tokens.last().map_or(0, |t| t.offset + t.lexeme.len());
    let mut parser = Parser { tokens, pos: 0, end };
    let expr = parser.or_expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError {
            offset: tok.offset,
            expected: vec!["operator".into(), "end of input".into()],
            message: format!("unexpected {} {:?}", tok.kind, tok.lexeme),
        });
    }
    Ok(expr)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    end: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self, ops: &[&str]) -> Option<&'t Token> {
        self.peek()
            .filter(|t| t.kind == TokenKind::Op && ops.contains(&t.lexeme.as_str()))
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let tok = self.tokens.get(self.pos);
        self.pos += 1;
        tok
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn error(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: message.into(),
        }
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.peek_op(&["or"]).is_some() {
            self.bump();
            let right = self.and_expr()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.not_expr()?;
        while self.peek_op(&["and"]).is_some() {
            self.bump();
            let right = self.not_expr()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op(&["not"]).is_some() {
            self.bump();
            let child = self.not_expr()?;
            return Ok(Expr::unary(UnaryOp::Not, child));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        const CMP: [&str; 6] = ["==", "!=", "<", "<=", ">", ">="];
        let left = self.additive()?;
        let Some(tok) = self.peek_op(&CMP) else {
            return Ok(left);
        };
        self.bump();
        let right = self.additive()?;
        if self.peek_op(&CMP).is_some() {
            return Err(self.error(
                "non-associative comparison",
                &["'and'", "'or'", "')'", "end of input"],
            ));
        }
        Ok(Expr::binary(binary_op(&tok.lexeme), left, right))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        while let Some(tok) = self.peek_op(&["+", "-"]) {
            self.bump();
            let right = self.multiplicative()?;
            left = Expr::binary(binary_op(&tok.lexeme), left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        while let Some(tok) = self.peek_op(&["*", "/"]) {
            self.bump();
            let right = self.unary()?;
            left = Expr::binary(binary_op(&tok.lexeme), left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op(&["-"]).is_some() {
            self.bump();
            if let Some(tok) = self.peek() {
                if matches!(tok.kind, TokenKind::Int | TokenKind::Float) {
                    self.bump();
                    return Ok(Expr::Literal(Value::Number(-number(tok))));
                }
            }
            let child = self.unary()?;
            return Ok(Expr::unary(UnaryOp::Negate, child));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        const START: [&str; 6] = ["identifier", "number", "boolean", "string", "'('", "'-'"];
        let Some(tok) = self.peek() else {
            return Err(self.error("unexpected end of input", &START));
        };
        match tok.kind {
            TokenKind::Int | TokenKind::Float => {
                self.bump();
                Ok(Expr::Literal(Value::Number(number(tok))))
            }
            TokenKind::Bool => {
                self.bump();
                Ok(Expr::Literal(Value::Bool(tok.lexeme == "true")))
            }
            TokenKind::Str => {
                self.bump();
                Ok(Expr::Literal(Value::Str(lexer::unescape(&tok.lexeme))))
            }
            TokenKind::Ident => {
                self.bump();
                if self.peek().is_some_and(|t| t.kind == TokenKind::LParen) {
                    self.bump();
                    let args = self.arguments()?;
                    Ok(Expr::Call(tok.lexeme.clone(), args))
                } else {
                    Ok(Expr::Identifier(tok.lexeme.clone()))
                }
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.or_expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            _ => Err(self.error(format!("unexpected {} {:?}", tok.kind, tok.lexeme), &START)),
        }
    }

    fn arguments(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.peek().is_some_and(|t| t.kind == TokenKind::RParen) {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.or_expr()?);
            match self.peek() {
                Some(t) if t.kind == TokenKind::Comma => {
                    self.bump();
                }
                Some(t) if t.kind == TokenKind::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.error("unterminated argument list", &["','", "')'"])),
            }
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(format!("missing {kind}"), &[&kind.to_string()])),
        }
    }
}

fn number(tok: &Token) -> f64 {
    // the lexer only produces digit runs with an optional fraction
    tok.lexeme.parse().expect("numeric lexeme")
}

fn binary_op(lexeme: &str) -> BinaryOp {
    BinaryOp::ALL
        .into_iter()
        .find(|op| op.symbol() == lexeme)
        .expect("lexer produced unknown operator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::tokenize;

    fn p(src: &str) -> Result<Expr, ParseError> {
        parse(&tokenize(src).unwrap())
    }

    #[test]
    fn queue_condition() {
        assert_eq!(
            p("driverQueuePos == numTaxisQueue").unwrap(),
            Expr::binary(
                BinaryOp::Eq,
                Expr::ident("driverQueuePos"),
                Expr::ident("numTaxisQueue")
            )
        );
    }

    #[test]
    fn not_binds_looser_than_comparison_tighter_than_and() {
        assert_eq!(
            p("not a and b").unwrap(),
            Expr::binary(
                BinaryOp::And,
                Expr::unary(UnaryOp::Not, Expr::ident("a")),
                Expr::ident("b")
            )
        );
        assert_eq!(
            p("not a == b").unwrap(),
            Expr::unary(
                UnaryOp::Not,
                Expr::binary(BinaryOp::Eq, Expr::ident("a"), Expr::ident("b"))
            )
        );
    }

    #[test]
    fn arithmetic_precedence() {
        assert_eq!(
            p("a + b * c - d").unwrap(),
            Expr::binary(
                BinaryOp::Sub,
                Expr::binary(
                    BinaryOp::Add,
                    Expr::ident("a"),
                    Expr::binary(BinaryOp::Mul, Expr::ident("b"), Expr::ident("c"))
                ),
                Expr::ident("d")
            )
        );
        assert_eq!(
            p("a or b and c").unwrap(),
            Expr::binary(
                BinaryOp::Or,
                Expr::ident("a"),
                Expr::binary(BinaryOp::And, Expr::ident("b"), Expr::ident("c"))
            )
        );
    }

    #[test]
    fn chained_comparison_rejected() {
        let err = p("a < b < c").unwrap_err();
        assert_eq!(err.message, "non-associative comparison");
        assert_eq!(err.offset, 6);
        assert!(p("(a < b) == c").is_ok());
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(p("-5").unwrap(), Expr::literal(-5.0));
        assert_eq!(
            p("-(5)").unwrap(),
            Expr::unary(UnaryOp::Negate, Expr::literal(5.0))
        );
        assert_eq!(
            p("- x").unwrap(),
            Expr::unary(UnaryOp::Negate, Expr::ident("x"))
        );
    }

    #[test]
    fn calls() {
        assert_eq!(
            p("queueLength() == 7").unwrap(),
            Expr::binary(
                BinaryOp::Eq,
                Expr::Call("queueLength".into(), vec![]),
                Expr::literal(7.0)
            )
        );
        assert_eq!(
            p("max(a, 2)").unwrap(),
            Expr::Call("max".into(), vec![Expr::ident("a"), Expr::literal(2.0)])
        );
    }

    #[test]
    fn error_offsets() {
        let err = p("a ==").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(p("").unwrap_err().offset, 0);
        assert_eq!(p("(a").unwrap_err().offset, 2);
        assert_eq!(p("a b").unwrap_err().offset, 2);
        assert_eq!(p("f(a b)").unwrap_err().offset, 4);
        assert_eq!(p(")").unwrap_err().offset, 0);
    }
}

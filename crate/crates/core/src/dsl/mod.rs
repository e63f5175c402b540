//! Condition language for norm `condition` and `activation` fields.

mod ast;
mod eval;
mod lexer;
mod parser;
mod printer;

pub use ast::{BinaryOp, Expr, UnaryOp, Value, ValueTag};
pub use eval::{evaluate, Bindings, EvalError, EvaluationContext, FunctionRegistry, HostFunction};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse, ParseError};
pub use printer::pretty_print;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl SyntaxError {
    pub fn offset(&self) -> usize {
        match self {
            SyntaxError::Lex(e) => e.offset(),
            SyntaxError::Parse(e) => e.offset,
        }
    }
}

/// Tokenizes and parses `source`.
pub fn parse_source(source: &str) -> Result<Expr, SyntaxError> {
    Ok(parse(&tokenize(source)?)?)
}

/// Like [`parse_source`], but first rewrites the capitalised `True` / `False`
/// spellings found in hand-written norm listings into boolean literals.
pub fn parse_lenient(source: &str) -> Result<Expr, SyntaxError> {
    let mut tokens = tokenize(source)?;
    for tok in &mut tokens {
        if tok.kind == TokenKind::Ident && (tok.lexeme == "True" || tok.lexeme == "False") {
            tok.kind = TokenKind::Bool;
            tok.lexeme = tok.lexeme.to_lowercase();
        }
    }
    Ok(parse(&tokens)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenient_booleans() {
        assert_eq!(parse_lenient("True").unwrap(), Expr::literal(true));
        assert_eq!(
            parse_lenient("x or False").unwrap(),
            Expr::binary(BinaryOp::Or, Expr::ident("x"), Expr::literal(false))
        );
        assert_eq!(parse_source("True").unwrap(), Expr::ident("True"));
    }

    #[test]
    fn syntax_error_offsets() {
        assert_eq!(parse_source("a @ b").unwrap_err().offset(), 2);
        assert_eq!(parse_source("a ==").unwrap_err().offset(), 4);
    }
}

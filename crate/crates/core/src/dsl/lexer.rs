use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Int,
    Float,
    Bool,
    Str,
    Op,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TokenKind::Ident => "identifier",
            TokenKind::Int => "integer",
            TokenKind::Float => "float",
            TokenKind::Bool => "boolean",
            TokenKind::Str => "string",
            TokenKind::Op => "operator",
            TokenKind::LParen => "'('",
            TokenKind::RParen => "')'",
            TokenKind::Comma => "','",
        };
        f.write_str(name)
    }
}

/// A lexeme with its byte offset into the source.
///
/// For `Str` tokens the lexeme is the raw quoted text, escapes included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unexpected character {ch:?} at offset {offset}")]
    BadCharacter { ch: char, offset: usize },
    #[error("unterminated {what} at offset {offset}")]
    Unterminated { what: &'static str, offset: usize },
}

impl LexError {
    pub fn offset(&self) -> usize {
        match self {
            LexError::BadCharacter { offset, .. } | LexError::Unterminated { offset, .. } => *offset,
        }
    }
}

const KEYWORD_OPS: [&str; 3] = ["and", "or", "not"];

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;

    while pos < bytes.len() {
        let c = bytes[pos];
        let start = pos;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                pos += 1;
                continue;
            }
            b'(' | b')' | b',' => {
                let kind = match c {
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    _ => TokenKind::Comma,
                };
                pos += 1;
                tokens.push(token(kind, &source[start..pos], start));
            }
            b'+' | b'-' | b'*' | b'/' => {
                pos += 1;
                tokens.push(token(TokenKind::Op, &source[start..pos], start));
            }
            b'<' | b'>' => {
                pos += 1;
                if bytes.get(pos) == Some(&b'=') {
                    pos += 1;
                }
                tokens.push(token(TokenKind::Op, &source[start..pos], start));
            }
            b'=' | b'!' => {
                if bytes.get(pos + 1) != Some(&b'=') {
                    return Err(LexError::Unterminated {
                        what: "operator",
                        offset: start,
                    });
                }
                pos += 2;
                tokens.push(token(TokenKind::Op, &source[start..pos], start));
            }
            b'"' => {
                pos += 1;
                loop {
                    match bytes.get(pos) {
                        None => {
                            return Err(LexError::Unterminated {
                                what: "string",
                                offset: start,
                            })
                        }
                        Some(b'\\') => pos += 2,
                        Some(b'"') => {
                            pos += 1;
                            break;
                        }
                        Some(_) => pos += 1,
                    }
                }
                tokens.push(token(TokenKind::Str, &source[start..pos], start));
            }
            b'0'..=b'9' => {
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                let mut kind = TokenKind::Int;
                if bytes.get(pos) == Some(&b'.') {
                    pos += 1;
                    if !bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                        return Err(LexError::Unterminated {
                            what: "number",
                            offset: start,
                        });
                    }
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    kind = TokenKind::Float;
                }
                tokens.push(token(kind, &source[start..pos], start));
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                while pos < bytes.len() && (bytes[pos] == b'_' || bytes[pos].is_ascii_alphanumeric()) {
                    pos += 1;
                }
                let word = &source[start..pos];
                let kind = if word == "true" || word == "false" {
                    TokenKind::Bool
                } else if KEYWORD_OPS.contains(&word) {
                    TokenKind::Op
                } else {
                    TokenKind::Ident
                };
                tokens.push(token(kind, word, start));
            }
            _ => {
                let ch = source[start..].chars().next().unwrap_or('\u{fffd}');
                return Err(LexError::BadCharacter { ch, offset: start });
            }
        }
    }
    Ok(tokens)
}

fn token(kind: TokenKind, lexeme: &str, offset: usize) -> Token {
    Token {
        kind,
        lexeme: lexeme.to_string(),
        offset,
    }
}

/// Decodes the body of a `Str` lexeme (surrounding quotes included).
pub(crate) fn unescape(lexeme: &str) -> String {
    let inner = &lexeme[1..lexeme.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

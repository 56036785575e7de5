//! Hand-rolled lexer for the specification language.

use super::{Span, SpecDiagnostic};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Colon,
    Bang,
    Dot,
    Comma,
    Semi,
    Eq,
    Pipe,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(i) => format!("'{i}'"),
            Tok::Str(_) => "string literal".into(),
            Tok::Colon => "':'".into(),
            Tok::Bang => "'!'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Comma => "','".into(),
            Tok::Semi => "';'".into(),
            Tok::Eq => "'='".into(),
            Tok::Pipe => "'|'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Identifiers may contain hyphens after the first character so that
/// metamodel names like `trace-mm` lex as single tokens. The language
/// has no arithmetic, so this is unambiguous.
fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub fn lex(text: &str) -> Result<Vec<Token>, SpecDiagnostic> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(ch) = c {
                if ch == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let span = Span { line, col };
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => {
                out.push(Token { tok: Tok::Eof, span });
                return Ok(out);
            }
        };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // line comments
        if c == '/' {
            bump!();
            if chars.peek() == Some(&'/') {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    bump!();
                }
                continue;
            }
            return Err(SpecDiagnostic::error(span, "unexpected character '/'"));
        }
        if is_ident_start(c) {
            let mut s = String::new();
            while let Some(&n) = chars.peek() {
                if is_ident_continue(n) {
                    s.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), span });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() {
                    s.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            let value: i64 = s
                .parse()
                .map_err(|_| SpecDiagnostic::error(span, format!("integer literal '{s}' out of range")))?;
            out.push(Token { tok: Tok::Int(value), span });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match bump!() {
                    Some('"') => break,
                    Some('\\') => match bump!() {
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('n') => s.push('\n'),
                        other => {
                            return Err(SpecDiagnostic::error(
                                span,
                                format!(
                                    "unknown escape '\\{}'",
                                    other.map(String::from).unwrap_or_default()
                                ),
                            ))
                        }
                    },
                    Some(ch) => s.push(ch),
                    None => return Err(SpecDiagnostic::error(span, "unterminated string literal")),
                }
            }
            out.push(Token { tok: Tok::Str(s), span });
            continue;
        }
        let tok = match c {
            ':' => Tok::Colon,
            '!' => Tok::Bang,
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '|' => Tok::Pipe,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            other => {
                return Err(SpecDiagnostic::error(span, format!("unexpected character '{other}'")))
            }
        };
        bump!();
        out.push(Token { tok, span });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_idents_with_hyphens() {
        let toks = lex("trace-mm x").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("trace-mm".into()));
        assert_eq!(toks[1].tok, Tok::Ident("x".into()));
    }

    #[test]
    fn tracks_line_and_column() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!((toks[1].span.line, toks[1].span.col), (2, 3));
    }

    #[test]
    fn skips_line_comments() {
        let toks = lex("a // comment\nb").unwrap();
        assert_eq!(toks.len(), 3); // a, b, eof
    }

    #[test]
    fn string_escapes() {
        let toks = lex(r#""a\"b\\c""#).unwrap();
        assert_eq!(toks[0].tok, Tok::Str("a\"b\\c".into()));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = lex("a $ b").unwrap_err();
        assert!(err.message.contains('$'));
        assert_eq!(err.location.col, 3);
    }
}

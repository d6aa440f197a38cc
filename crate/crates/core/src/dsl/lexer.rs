use super::diagnostic::{DiagCode, ParseDiagnostic, Severity, SourceSpan};
use crate::model::is_ident;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Word(String),
    Str(String),
    Int(u64),
    LBrace,
    RBrace,
    Eq,
    Colon,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(_) => "string".to_string(),
            Tok::Int(n) => format!("`{n}`"),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn span(&self) -> SourceSpan {
        SourceSpan {
            line: self.line,
            column: self.column,
            offset: self.pos,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

fn syntax(span: SourceSpan, message: String) -> ParseDiagnostic {
    ParseDiagnostic {
        severity: Severity::Error,
        code: DiagCode::Syntax,
        span: Some(span),
        location: String::new(),
        message,
    }
}

/// Splits `src` into tokens. Lexical errors are reported and the offending
/// input skipped, so the token stream is always terminated by `Eof`.
pub(crate) fn tokenize(src: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let span = cur.span();
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            '#' => {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '{' | '}' | '=' | ':' => {
                cur.bump();
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '=' => Tok::Eq,
                    _ => Tok::Colon,
                };
                tokens.push(Token { tok, span });
            }
            '"' => {
                cur.bump();
                match lex_string(&mut cur, &mut errors) {
                    Some(s) => tokens.push(Token {
                        tok: Tok::Str(s),
                        span,
                    }),
                    None => errors.push(syntax(span, "unterminated string".into())),
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = cur.pos;
                while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    cur.bump();
                }
                let word = &src[start..cur.pos];
                if word.bytes().all(|b| b.is_ascii_digit()) {
                    match word.parse::<u64>() {
                        Ok(n) => tokens.push(Token {
                            tok: Tok::Int(n),
                            span,
                        }),
                        Err(_) => errors.push(syntax(span, format!("integer `{word}` out of range"))),
                    }
                } else if is_ident(word) {
                    tokens.push(Token {
                        tok: Tok::Word(word.to_string()),
                        span,
                    });
                } else {
                    errors.push(syntax(
                        span,
                        format!("invalid identifier `{word}` (expected [a-z_][a-z0-9_]*)"),
                    ));
                }
            }
            other => {
                cur.bump();
                errors.push(syntax(span, format!("unexpected character {other:?}")));
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: cur.span(),
    });
    (tokens, errors)
}

/// Reads the body of a string literal after the opening quote. Returns `None`
/// if the input ends first.
fn lex_string(cur: &mut Cursor<'_>, errors: &mut Vec<ParseDiagnostic>) -> Option<String> {
    let mut out = String::new();
    loop {
        let span = cur.span();
        match cur.bump()? {
            '"' => return Some(out),
            '\\' => match cur.bump()? {
                '"' => out.push('"'),
                '\\' => out.push('\\'),
                'n' => out.push('\n'),
                't' => out.push('\t'),
                other => errors.push(syntax(span, format!("unknown escape `\\{other}`"))),
            },
            c => out.push(c),
        }
    }
}

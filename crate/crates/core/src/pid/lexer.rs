use crate::diagnostic::{Diagnostic, SourceSpan};

pub const E_LEX: &str = "E_LEX";
pub const E_BOM: &str = "E_BOM";

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    /// Bare word, such as a keyword or a unit expression.
    Word(String),
    Str(String),
    Number {
        value: f64,
        raw: String,
    },
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Newline,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl Token {
    pub fn span(&self, file: &str) -> SourceSpan {
        SourceSpan {
            file: file.to_string(),
            line: self.line,
            column: self.column,
            length: self.length,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Word(w) => format!("`{w}`"),
            TokenKind::Str(_) => "string".into(),
            TokenKind::Number { raw, .. } => format!("number `{raw}`"),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Newline => "end of line".into(),
            TokenKind::Eof => "end of file".into(),
        }
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '{' | '}' | '[' | ']' | ',' | ':' | '"' | '#')
}

/// `[+-]?(digits[.digits]|.digits)([eE][+-]?digits)?`
pub(crate) fn is_number_literal(word: &str) -> bool {
    let s = word.strip_prefix(['+', '-']).unwrap_or(word);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (mantissa, None),
    };
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = match frac {
        Some(f) => (digits(int) && (f.is_empty() || digits(f))) || (int.is_empty() && digits(f)),
        None => digits(int),
    };
    let exponent_ok = match exponent {
        Some(e) => digits(e.strip_prefix(['+', '-']).unwrap_or(e)),
        None => true,
    };
    mantissa_ok && exponent_ok
}

pub(crate) fn tokenize(file: &str, text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut line = 1u32;
    let mut column = 1u32;
    let mut chars = text.chars().peekable();

    if text.starts_with('\u{feff}') {
        diags.push(
            Diagnostic::error(
                E_BOM,
                "byte-order mark is not allowed; save the file as plain UTF-8",
            )
            .with_span(SourceSpan {
                file: file.to_string(),
                line: 1,
                column: 1,
                length: 1,
            }),
        );
        chars.next();
        column += 1;
    }

    while let Some(&c) = chars.peek() {
        let start_col = column;
        match c {
            '\n' => {
                chars.next();
                tokens.push(Token {
                    kind: TokenKind::Newline,
                    line,
                    column,
                    length: 1,
                });
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '{' | '}' | '[' | ']' | ',' | ':' => {
                chars.next();
                column += 1;
                let kind = match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    _ => TokenKind::Colon,
                };
                tokens.push(Token {
                    kind,
                    line,
                    column: start_col,
                    length: 1,
                });
            }
            '"' => {
                chars.next();
                column += 1;
                let mut value = String::new();
                let mut terminated = false;
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                    match c {
                        '"' => {
                            terminated = true;
                            break;
                        }
                        '\\' => {
                            let esc_col = column - 1;
                            match chars.peek().copied() {
                                Some(e @ ('"' | '\\' | 'n' | 't')) => {
                                    chars.next();
                                    column += 1;
                                    value.push(match e {
                                        'n' => '\n',
                                        't' => '\t',
                                        other => other,
                                    });
                                }
                                other => {
                                    diags.push(
                                        Diagnostic::error(
                                            E_LEX,
                                            format!(
                                                "invalid escape sequence `\\{}`",
                                                other.map(String::from).unwrap_or_default()
                                            ),
                                        )
                                        .with_span(
                                            SourceSpan {
                                                file: file.to_string(),
                                                line,
                                                column: esc_col,
                                                length: 1,
                                            },
                                        ),
                                    );
                                }
                            }
                        }
                        c => value.push(c),
                    }
                }
                if !terminated {
                    diags.push(
                        Diagnostic::error(E_LEX, "unterminated string literal").with_span(
                            SourceSpan {
                                file: file.to_string(),
                                line,
                                column: start_col,
                                length: column - start_col,
                            },
                        ),
                    );
                }
                tokens.push(Token {
                    kind: TokenKind::Str(value),
                    line,
                    column: start_col,
                    length: column - start_col,
                });
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if is_delimiter(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    column += 1;
                }
                let kind = if is_number_literal(&word) {
                    match word.parse::<f64>() {
                        Ok(value) if value.is_finite() => TokenKind::Number { value, raw: word },
                        _ => {
                            diags.push(
                                Diagnostic::error(
                                    E_LEX,
                                    format!("number `{word}` is out of range"),
                                )
                                .with_span(SourceSpan {
                                    file: file.to_string(),
                                    line,
                                    column: start_col,
                                    length: column - start_col,
                                }),
                            );
                            TokenKind::Word(word)
                        }
                    }
                } else {
                    TokenKind::Word(word)
                };
                tokens.push(Token {
                    kind,
                    line,
                    column: start_col,
                    length: column - start_col,
                });
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        column,
        length: 0,
    });
    (tokens, diags)
}

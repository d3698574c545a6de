//! Block-level recursive-descent parser shared by PID bundles and decision
//! files. Produces untyped blocks; typing happens in `parser`.

use super::lexer::{tokenize, Token, TokenKind};
use crate::diagnostic::{Diagnostic, SourceSpan};

pub const E_SYNTAX: &str = "E_SYNTAX";
pub const E_UNKNOWN_BLOCK: &str = "E_UNKNOWN_BLOCK";

#[derive(Debug, Clone, PartialEq)]
pub enum ValueItem {
    Str {
        text: String,
        span: SourceSpan,
    },
    Number {
        value: f64,
        raw: String,
        unit: Option<(String, SourceSpan)>,
        span: SourceSpan,
    },
    Range {
        min: f64,
        max: f64,
        unit: Option<(String, SourceSpan)>,
        span: SourceSpan,
    },
    /// A bare word, optionally followed by a string or number argument:
    /// `function "x"` or `interval 0.5`.
    Name {
        name: String,
        span: SourceSpan,
        arg: Option<Box<ValueItem>>,
    },
}

impl ValueItem {
    pub fn span(&self) -> &SourceSpan {
        match self {
            ValueItem::Str { span, .. }
            | ValueItem::Number { span, .. }
            | ValueItem::Range { span, .. }
            | ValueItem::Name { span, .. } => span,
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ValueItem::Str { .. } => "a string",
            ValueItem::Number { .. } => "a number",
            ValueItem::Range { .. } => "a range",
            ValueItem::Name { arg: None, .. } => "a name",
            ValueItem::Name { arg: Some(_), .. } => "a name with argument",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub name_span: SourceSpan,
    pub items: Vec<ValueItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: String,
    pub kind_span: SourceSpan,
    pub id: String,
    pub id_span: SourceSpan,
    pub fields: Vec<Field>,
}

struct Cursor<'a> {
    file: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    kinds: &'a [&'a str],
    diags: Vec<Diagnostic>,
}

type Step<T> = Result<T, ()>;

impl<'a> Cursor<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let tok = self.peek().clone();
        if !matches!(tok.kind, TokenKind::Eof) {
            self.pos += 1;
        }
        tok
    }

    fn span(&self, tok: &Token) -> SourceSpan {
        tok.span(self.file)
    }

    fn error_at(&mut self, tok: &Token, message: impl Into<String>) {
        let span = self.span(tok);
        self.diags
            .push(Diagnostic::error(E_SYNTAX, message).with_span(span));
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().kind, TokenKind::Newline) {
            self.bump();
        }
    }

    fn starts_block(&self) -> bool {
        let tok = self.peek();
        match &tok.kind {
            TokenKind::Word(w) => {
                tok.column == 1
                    && self.kinds.contains(&w.as_str())
                    && matches!(self.peek_at(1).kind, TokenKind::Str(_))
            }
            _ => false,
        }
    }

    /// Skips to just past the closing brace of the current block, or to the
    /// start of the next top-level block, whichever comes first.
    fn recover(&mut self) {
        loop {
            match self.peek().kind {
                TokenKind::Eof => return,
                TokenKind::RBrace => {
                    self.bump();
                    return;
                }
                _ if self.starts_block() => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn file(&mut self) -> Vec<Block> {
        let mut blocks = Vec::new();
        loop {
            self.skip_newlines();
            if matches!(self.peek().kind, TokenKind::Eof) {
                break;
            }
            match self.block() {
                Ok(Some(block)) => blocks.push(block),
                Ok(None) => {}
                Err(()) => self.recover(),
            }
        }
        blocks
    }

    fn block(&mut self) -> Step<Option<Block>> {
        let kind_tok = self.bump();
        let kind = match &kind_tok.kind {
            TokenKind::Word(w) => w.clone(),
            _ => {
                let msg = format!("expected a block keyword, found {}", kind_tok.describe());
                self.error_at(&kind_tok, msg);
                return Err(());
            }
        };
        if !self.kinds.contains(&kind.as_str()) {
            let span = self.span(&kind_tok);
            self.diags.push(
                Diagnostic::error(
                    E_UNKNOWN_BLOCK,
                    format!(
                        "unknown block kind `{kind}`; expected one of {}",
                        self.kinds.join(", ")
                    ),
                )
                .with_span(span),
            );
            return Err(());
        }
        let id_tok = self.bump();
        let id = match &id_tok.kind {
            TokenKind::Str(s) => crate::canonical::normalize_whitespace(s),
            _ => {
                let msg = format!(
                    "expected a quoted id after `{kind}`, found {}",
                    id_tok.describe()
                );
                self.error_at(&id_tok, msg);
                return Err(());
            }
        };
        if id.is_empty() {
            self.error_at(&id_tok, "block id must not be empty");
            return Err(());
        }
        let brace = self.bump();
        if !matches!(brace.kind, TokenKind::LBrace) {
            let msg = format!(
                "expected `{{` after {kind} \"{id}\", found {}",
                brace.describe()
            );
            self.error_at(&brace, msg);
            return Err(());
        }

        let mut fields = Vec::new();
        loop {
            self.skip_newlines();
            let tok = self.peek().clone();
            match &tok.kind {
                TokenKind::RBrace => {
                    self.bump();
                    break;
                }
                TokenKind::Eof => {
                    let msg = format!("{kind} \"{id}\" is missing its closing `}}`");
                    self.error_at(&kind_tok, msg);
                    return Err(());
                }
                TokenKind::Word(_) if self.starts_block() => {
                    let msg = format!("{kind} \"{id}\" is missing its closing `}}`");
                    self.error_at(&kind_tok, msg);
                    return Err(());
                }
                _ => fields.push(self.field()?),
            }
        }
        Ok(Some(Block {
            kind,
            kind_span: self.span(&kind_tok),
            id,
            id_span: self.span(&id_tok),
            fields,
        }))
    }

    fn is_field_start(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Word(_))
            && matches!(self.peek_at(1).kind, TokenKind::Colon)
    }

    fn field(&mut self) -> Step<Field> {
        let name_tok = self.bump();
        let name = match &name_tok.kind {
            TokenKind::Word(w) => w.clone(),
            _ => {
                let msg = format!("expected a field name, found {}", name_tok.describe());
                self.error_at(&name_tok, msg);
                return Err(());
            }
        };
        let colon = self.bump();
        if !matches!(colon.kind, TokenKind::Colon) {
            let msg = format!(
                "expected `:` after field `{name}`, found {}",
                colon.describe()
            );
            self.error_at(&colon, msg);
            return Err(());
        }
        let mut items = vec![self.item()?];
        loop {
            let tok = self.peek().clone();
            match tok.kind {
                TokenKind::Newline => {
                    self.bump();
                    break;
                }
                TokenKind::RBrace => break,
                TokenKind::Comma => {
                    self.bump();
                    if self.is_field_start() {
                        break;
                    }
                    items.push(self.item()?);
                }
                _ => {
                    let msg = format!("unexpected {} in value of `{name}`", tok.describe());
                    self.error_at(&tok, msg);
                    return Err(());
                }
            }
        }
        Ok(Field {
            name,
            name_span: self.span(&name_tok),
            items,
        })
    }

    /// A unit directly after a number or range: a word, or the number `1`.
    fn trailing_unit(&mut self) -> Option<(String, SourceSpan)> {
        let tok = self.peek().clone();
        let text = match &tok.kind {
            TokenKind::Word(w) if !matches!(self.peek_at(1).kind, TokenKind::Colon) => w.clone(),
            TokenKind::Number { raw, .. } if raw == "1" => raw.clone(),
            _ => return None,
        };
        self.bump();
        Some((text, self.span(&tok)))
    }

    fn number(&mut self) -> Step<(f64, String, Token)> {
        let tok = self.bump();
        match &tok.kind {
            TokenKind::Number { value, raw } => Ok((*value, raw.clone(), tok.clone())),
            _ => {
                let msg = format!("expected a number, found {}", tok.describe());
                self.error_at(&tok, msg);
                Err(())
            }
        }
    }

    fn item(&mut self) -> Step<ValueItem> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Str(text) => {
                self.bump();
                Ok(ValueItem::Str {
                    text: text.clone(),
                    span: self.span(&tok),
                })
            }
            TokenKind::Number { .. } => {
                let (value, raw, tok) = self.number()?;
                let unit = self.trailing_unit();
                Ok(ValueItem::Number {
                    value,
                    raw,
                    unit,
                    span: self.span(&tok),
                })
            }
            TokenKind::LBracket => {
                self.bump();
                let (min, _, _) = self.number()?;
                let comma = self.bump();
                if !matches!(comma.kind, TokenKind::Comma) {
                    let msg = format!("expected `,` inside range, found {}", comma.describe());
                    self.error_at(&comma, msg);
                    return Err(());
                }
                let (max, _, _) = self.number()?;
                let close = self.bump();
                if !matches!(close.kind, TokenKind::RBracket) {
                    let msg = format!("expected `]` to close range, found {}", close.describe());
                    self.error_at(&close, msg);
                    return Err(());
                }
                let unit = self.trailing_unit();
                let mut span = self.span(&tok);
                if close.line == tok.line {
                    span.length = close.column + close.length - tok.column;
                }
                Ok(ValueItem::Range {
                    min,
                    max,
                    unit,
                    span,
                })
            }
            TokenKind::Word(name) => {
                self.bump();
                let next = self.peek().clone();
                let arg = match &next.kind {
                    TokenKind::Str(_) | TokenKind::Number { .. } => Some(Box::new(self.item()?)),
                    _ => None,
                };
                Ok(ValueItem::Name {
                    name: name.clone(),
                    span: self.span(&tok),
                    arg,
                })
            }
            _ => {
                let msg = format!("expected a value, found {}", tok.describe());
                self.error_at(&tok, msg);
                Err(())
            }
        }
    }
}

/// Parses `text` into raw blocks, accepting only the given block keywords.
pub fn parse_blocks(file: &str, text: &str, kinds: &[&str]) -> (Vec<Block>, Vec<Diagnostic>) {
    let (tokens, lex_diags) = tokenize(file, text);
    let mut cursor = Cursor {
        file,
        tokens,
        pos: 0,
        kinds,
        diags: lex_diags,
    };
    let blocks = cursor.file();
    (blocks, cursor.diags)
}

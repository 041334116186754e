use std::ops::Range;
use std::sync::Arc;

use crate::ast::Pos;
use crate::diagnostic::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    Symbol,
    Comment,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub pos: Pos,
    /// Byte range in the source.
    pub span: Range<usize>,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    pub fn is_symbol(&self, text: &str) -> bool {
        self.is(TokenKind::Symbol, text)
    }
}

/// Which identifiers the lexer admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    /// User specifications.
    #[default]
    Source,
    /// Generated obligations, which also use `$`-suffixed names such as
    /// `sv$` and `$atomic1`.
    Obligation,
}

pub const KEYWORDS: &[&str] = &[
    "module",
    "definitions",
    "end",
    "imports",
    "exports",
    "from",
    "state",
    "of",
    "inv",
    "init",
    "types",
    "values",
    "functions",
    "operations",
    "pre",
    "post",
    "ext",
    "rd",
    "wr",
    "pure",
    "dcl",
    "if",
    "then",
    "else",
    "elseif",
    "while",
    "do",
    "for",
    "to",
    "by",
    "in",
    "atomic",
    "return",
    "skip",
    "let",
    "be",
    "st",
    "forall",
    "exists",
    "exists1",
    "mu",
    "and",
    "or",
    "not",
    "true",
    "false",
    "nat",
    "nat1",
    "int",
    "real",
    "rat",
    "bool",
    "char",
    "token",
    "seq",
    "seq1",
    "set",
    "set1",
    "map",
    "inmap",
    "len",
    "dom",
    "rng",
    "hd",
    "tl",
    "inds",
    "elems",
    "card",
    "div",
    "mod",
    "rem",
    "union",
    "inter",
    "subset",
    "psubset",
    "munion",
    "abs",
    "floor",
    "trap",
    "tixe",
    "always",
    "exit",
    "cases",
    "others",
    "def",
    "all",
    "with",
    "error",
    "measure",
    "nil",
    "lambda",
    "iota",
    "reverse",
    "traces",
    "is",
];

const SYMBOLS: &[&str] = &[
    "|->", "==>", "<=>", "...", ":=", "==", "=>", "<=", ">=", "<>", "++", "->", "+>", "::", "&", "(", ")", "{", "}",
    "[", "]", ",", ";", ":", ".", "+", "-", "*", "/", "=", "<", ">", "|", "~", "^", "\\", "!", "@", "#",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn ident_start(c: char, dialect: Dialect) -> bool {
    c.is_alphabetic() || (dialect == Dialect::Obligation && c == '$')
}

fn ident_continue(c: char, dialect: Dialect) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || (dialect == Dialect::Obligation && c == '$')
}

/// Splits source text into tokens, including comment tokens. Whitespace is
/// not tokenized; every byte outside a token span is whitespace.
pub fn tokenize(source: &str, file: &str) -> Result<Vec<Token>, Diagnostic> {
    tokenize_with(source, file, Dialect::Source, Pos::new(1, 1))
}

/// As [`tokenize`], with an explicit dialect and starting position (used
/// for text lifted out of comments).
pub fn tokenize_with(source: &str, file: &str, dialect: Dialect, start: Pos) -> Result<Vec<Token>, Diagnostic> {
    let file: Arc<str> = Arc::from(file);
    let chars: Vec<(usize, char)> = source.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map(|c| c.0).unwrap_or(source.len());
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = start.line;
    let mut col = start.column;

    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if let Some((_, c)) = chars.get(*i) {
                if *c == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i].1;
        let pos = Pos::new(line, col);
        let start_byte = byte_at(i);
        let peek = |k: usize| chars.get(i + k).map(|c| c.1);

        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }

        // Line comment.
        if c == '-' && peek(1) == Some('-') {
            let mut n = 0;
            while i + n < chars.len() && chars[i + n].1 != '\n' {
                n += 1;
            }
            push(&mut tokens, TokenKind::Comment, source, start_byte, byte_at(i + n), pos);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }

        // Block comment.
        if c == '/' && peek(1) == Some('*') {
            let mut n = 2;
            loop {
                if i + n >= chars.len() {
                    return Err(Diagnostic::error(&file, pos, "unterminated block comment"));
                }
                if chars[i + n].1 == '*' && chars.get(i + n + 1).map(|c| c.1) == Some('/') {
                    n += 2;
                    break;
                }
                n += 1;
            }
            push(&mut tokens, TokenKind::Comment, source, start_byte, byte_at(i + n), pos);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }

        if c == '"' {
            let mut n = 1;
            loop {
                match chars.get(i + n).map(|c| c.1) {
                    None | Some('\n') => return Err(Diagnostic::error(&file, pos, "unterminated text literal")),
                    Some('\\') => n += 2,
                    Some('"') => {
                        n += 1;
                        break;
                    }
                    Some(_) => n += 1,
                }
            }
            push(&mut tokens, TokenKind::Text, source, start_byte, byte_at(i + n), pos);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }

        if c.is_ascii_digit() {
            let mut n = 0;
            while peek(n).is_some_and(|c| c.is_ascii_digit()) {
                n += 1;
            }
            if peek(n) == Some('.') && peek(n + 1).is_some_and(|c| c.is_ascii_digit()) {
                n += 1;
                while peek(n).is_some_and(|c| c.is_ascii_digit()) {
                    n += 1;
                }
            }
            push(&mut tokens, TokenKind::Number, source, start_byte, byte_at(i + n), pos);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }

        if ident_start(c, dialect) {
            let mut n = 1;
            while peek(n).is_some_and(|c| ident_continue(c, dialect)) {
                n += 1;
            }
            let word = &source[start_byte..byte_at(i + n)];
            // `mk_Name!` is one constructor token.
            if word.starts_with("mk_") && word.len() > 3 && peek(n) == Some('!') {
                n += 1;
            }
            let text = &source[start_byte..byte_at(i + n)];
            let kind = if is_keyword(text) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            push(&mut tokens, kind, source, start_byte, byte_at(i + n), pos);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }

        let rest = &source[start_byte..];
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            let n = sym.chars().count();
            push(&mut tokens, TokenKind::Symbol, source, start_byte, byte_at(i + n), pos);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }

        return Err(Diagnostic::error(&file, pos, format!("unexpected character '{c}'")));
    }
    Ok(tokens)
}

fn push(tokens: &mut Vec<Token>, kind: TokenKind, source: &str, from: usize, to: usize, pos: Pos) {
    tokens.push(Token {
        kind,
        text: source[from..to].to_string(),
        pos,
        span: from..to,
    });
}

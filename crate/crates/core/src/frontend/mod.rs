//! Lexing, parsing and annotation attachment.

pub mod annotations;
pub mod lexer;
pub mod parser;

use crate::ast::ModuleDefinition;
use crate::diagnostic::Diagnostic;

pub use annotations::attach_annotations;
pub use lexer::{tokenize, tokenize_with, Dialect, Token, TokenKind};
pub use parser::{parse_expression, parse_module, ParseError};

/// Tokenizes, parses and attaches loop annotations.
pub fn parse_source(source: &str, file: &str) -> (ModuleDefinition, Vec<Diagnostic>) {
    let tokens = match tokenize(source, file) {
        Ok(t) => t,
        Err(d) => return (ModuleDefinition::default(), vec![d]),
    };
    let (mut module, mut diags) = parse_module(&tokens, file);
    diags.extend(attach_annotations(&mut module, &tokens, file));
    (module, diags)
}

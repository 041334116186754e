//! `-- @LoopInvariant(expr);` comments and their attachment to loops.

use std::sync::Arc;

use crate::ast::{ModuleDefinition, Pos, Stmt, StmtKind};
use crate::diagnostic::Diagnostic;
use crate::frontend::lexer::{tokenize_with, Dialect, Token, TokenKind};
use crate::frontend::parser::parse_expression_tokens;

const LOOP_INVARIANT: &str = "@LoopInvariant";

/// A parsed annotation, waiting to be attached to the loop starting at `target`.
#[derive(Debug, Clone)]
pub struct LoopAnnotation {
    pub pos: Pos,
    pub target: Option<Pos>,
    pub expr: crate::ast::Expr,
}

fn comment_body(text: &str) -> &str {
    text.strip_prefix("--").unwrap_or(text).trim_start()
}

/// Parenthesis depth after scanning `s`, starting from `depth`.
fn paren_depth(s: &str, mut depth: i32) -> i32 {
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
    }
    depth
}

/// Finds the annotations in a token stream (comments included).
pub fn collect(tokens: &[Token], file: &str) -> (Vec<LoopAnnotation>, Vec<Diagnostic>) {
    let file_arc: Arc<str> = Arc::from(file);
    let mut out = Vec::new();
    let mut diags = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind != TokenKind::Comment || !t.text.starts_with("--") {
            i += 1;
            continue;
        }
        let body = comment_body(&t.text);
        if !body.starts_with('@') {
            i += 1;
            continue;
        }
        if !body.starts_with(LOOP_INVARIANT) {
            let name: String = body.chars().take_while(|c| !c.is_whitespace() && *c != '(').collect();
            diags.push(Diagnostic::warning(
                &file_arc,
                t.pos,
                format!("unknown annotation '{name}' ignored"),
            ));
            i += 1;
            continue;
        }

        // Gather text until the parentheses balance, across comment lines.
        let offset = t.text.len() - body.len();
        let after_name = &body[LOOP_INVARIANT.len()..];
        let open_col = t.pos.column + (t.text[..offset].chars().count() + LOOP_INVARIANT.len()) as u32;
        let mut text = after_name.to_string();
        let mut depth = paren_depth(after_name, 0);
        let mut last = i;
        while depth > 0 {
            match tokens.get(last + 1) {
                Some(n) if n.kind == TokenKind::Comment && n.text.starts_with("--") => {
                    last += 1;
                    let more = comment_body(&n.text);
                    text.push('\n');
                    text.push_str(more);
                    depth = paren_depth(more, depth);
                }
                _ => break,
            }
        }
        i = last + 1;

        let trimmed = text.trim_start();
        let lead = text.len() - trimmed.len();
        if !trimmed.starts_with('(') || depth != 0 {
            diags.push(Diagnostic::error(
                &file_arc,
                t.pos,
                "malformed @LoopInvariant annotation: expected '(expression)'",
            ));
            continue;
        }
        let close = match matching_paren(trimmed) {
            Some(c) => c,
            None => {
                diags.push(Diagnostic::error(
                    &file_arc,
                    t.pos,
                    "malformed @LoopInvariant annotation: unbalanced parentheses",
                ));
                continue;
            }
        };
        let inner = &trimmed[1..close];
        let start = Pos::new(t.pos.line, open_col + lead as u32 + 1);
        let expr = tokenize_with(inner, file, Dialect::Source, start).and_then(|toks| {
            parse_expression_tokens(&toks, file)
                .map_err(|e| Diagnostic::error(&file_arc, e.pos, format!("in @LoopInvariant: {}", e.message)))
        });
        let target = tokens[i..].iter().find(|n| n.kind != TokenKind::Comment).map(|n| n.pos);
        match expr {
            Ok(expr) => out.push(LoopAnnotation {
                pos: t.pos,
                target,
                expr,
            }),
            Err(d) => diags.push(d),
        }
    }
    (out, diags)
}

fn matching_paren(s: &str) -> Option<usize> {
    let mut depth = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn set_invariant(stmt: &mut Stmt, target: Pos, expr: &crate::ast::Expr) -> Option<bool> {
    if stmt.pos == target && stmt.is_loop() {
        let slot = match &mut stmt.kind {
            StmtKind::While { invariant, .. }
            | StmtKind::ForIndex { invariant, .. }
            | StmtKind::ForSeq { invariant, .. } => invariant,
            _ => unreachable!(),
        };
        let fresh = slot.is_none();
        *slot = Some(expr.clone());
        return Some(fresh);
    }
    for c in stmt.children_mut() {
        if let Some(r) = set_invariant(c, target, expr) {
            return Some(r);
        }
    }
    None
}

/// Attaches each annotation to the loop whose first token follows it.
pub fn attach_annotations(module: &mut ModuleDefinition, tokens: &[Token], file: &str) -> Vec<Diagnostic> {
    let file_arc: Arc<str> = Arc::from(file);
    let (annotations, mut diags) = collect(tokens, file);
    for a in annotations {
        let attached = a.target.and_then(|target| {
            module
                .operations
                .iter_mut()
                .find_map(|op| set_invariant(&mut op.body, target, &a.expr))
        });
        match attached {
            Some(true) => {}
            Some(false) => diags.push(Diagnostic::warning(
                &file_arc,
                a.pos,
                "loop already has an invariant; the later annotation replaces it",
            )),
            None => diags.push(Diagnostic::warning(
                &file_arc,
                a.pos,
                "@LoopInvariant annotation is not followed by a loop and is ignored",
            )),
        }
    }
    diags
}

//! Recursive descent parser for the supported VDM-SL subset.

use std::sync::Arc;

use thiserror::Error;

use crate::ast::*;
use crate::diagnostic::Diagnostic;
use crate::frontend::lexer::{Dialect, Token, TokenKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

pub type ParseResult<T> = Result<T, ParseError>;

/// Reserved name of an unnamed operation result.
pub const RESULT_NAME: &str = "RESULT";

const SECTION_KEYWORDS: &[&str] = &["state", "types", "values", "functions", "operations", "end", "traces"];

const UNSUPPORTED_STATEMENTS: &[(&str, &str)] = &[
    ("trap", "exception handling"),
    ("tixe", "exception handling"),
    ("always", "exception handling"),
    ("exit", "exception handling"),
    ("cases", "cases statements"),
    ("let", "let statements"),
    ("def", "def statements"),
    ("error", "error statements"),
];

pub struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    file: Arc<str>,
    next_stmt: u32,
    diagnostics: Vec<Diagnostic>,
}

/// Parses a whole module from tokens (comments are skipped). Syntax errors
/// are reported as diagnostics; parsing resumes at the next definition.
pub fn parse_module(tokens: &[Token], file: &str) -> (ModuleDefinition, Vec<Diagnostic>) {
    let mut p = Parser::new(tokens, file);
    let module = p.module();
    (module, p.diagnostics)
}

/// Parses a single expression covering all of `tokens`.
pub fn parse_expression_tokens(tokens: &[Token], file: &str) -> ParseResult<Expr> {
    let mut p = Parser::new(tokens, file);
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.pos, format!("unexpected '{}' after expression", t.text)));
    }
    Ok(e)
}

/// Tokenizes and parses one expression in the given dialect.
pub fn parse_expression(source: &str, dialect: Dialect) -> Result<Expr, Diagnostic> {
    let tokens = crate::frontend::lexer::tokenize_with(source, "<expr>", dialect, Pos::new(1, 1))?;
    parse_expression_tokens(&tokens, "<expr>").map_err(|e| Diagnostic::error(&Arc::from("<expr>"), e.pos, e.message))
}

impl Parser {
    pub fn new(tokens: &[Token], file: &str) -> Self {
        Parser {
            tokens: tokens
                .iter()
                .filter(|t| t.kind != TokenKind::Comment)
                .cloned()
                .collect(),
            idx: 0,
            file: Arc::from(file),
            next_stmt: 0,
            diagnostics: Vec::new(),
        }
    }

    // ---- token helpers ----

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.tokens.get(self.idx + k)
    }

    fn here(&self) -> Pos {
        self.peek()
            .or_else(|| self.tokens.last())
            .map(|t| t.pos)
            .unwrap_or(Pos::new(1, 1))
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn at_symbol(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_symbol(s))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn at_ident(&self) -> bool {
        self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
    }

    fn eat_symbol(&mut self, s: &str) -> bool {
        if self.at_symbol(s) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: &str) -> bool {
        if self.at_keyword(k) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn error_at(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.error_at(t.pos, format!("expected {expected}, found '{}'", t.text)),
            None => self.error_at(self.here(), format!("expected {expected}, found end of input")),
        }
    }

    fn expect_symbol(&mut self, s: &str) -> ParseResult<Pos> {
        match self.peek() {
            Some(t) if t.is_symbol(s) => {
                let pos = t.pos;
                self.idx += 1;
                Ok(pos)
            }
            _ => Err(self.unexpected(&format!("'{s}'"))),
        }
    }

    fn expect_keyword(&mut self, k: &str) -> ParseResult<Pos> {
        match self.peek() {
            Some(t) if t.is_keyword(k) => {
                let pos = t.pos;
                self.idx += 1;
                Ok(pos)
            }
            _ => Err(self.unexpected(&format!("'{k}'"))),
        }
    }

    fn ident(&mut self) -> ParseResult<(String, Pos)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                let r = (t.text.clone(), t.pos);
                self.idx += 1;
                Ok(r)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    /// An identifier introduced by a declaration; `RESULT` is reserved.
    fn binder(&mut self) -> ParseResult<(String, Pos)> {
        let (name, pos) = self.ident()?;
        if name == RESULT_NAME {
            return Err(self.error_at(pos, "RESULT is a reserved name and cannot be declared"));
        }
        Ok((name, pos))
    }

    fn stmt(&mut self, kind: StmtKind, pos: Pos) -> Stmt {
        let id = StmtId(self.next_stmt);
        self.next_stmt += 1;
        Stmt { id, kind, pos }
    }

    fn report(&mut self, e: ParseError) {
        self.diagnostics.push(Diagnostic::error(&self.file, e.pos, e.message));
    }

    // ---- module structure ----

    fn module(&mut self) -> ModuleDefinition {
        let mut m = ModuleDefinition::default();
        let mut wrapped = false;
        if self.at_keyword("module") {
            self.bump();
            match self.ident() {
                Ok((name, _)) => m.name = Some(name),
                Err(e) => self.report(e),
            }
            if self.at_keyword("imports") || self.at_keyword("exports") {
                let pos = self.here();
                self.report(self.error_at(pos, "unsupported construct: module imports/exports are out of scope"));
                while self.peek().is_some() && !self.at_keyword("definitions") {
                    self.bump();
                }
            }
            if let Err(e) = self.expect_keyword("definitions") {
                self.report(e);
            }
            wrapped = true;
        }

        while let Some(t) = self.peek() {
            let pos = t.pos;
            if t.kind != TokenKind::Keyword {
                let msg = format!("expected a definition section, found '{}'", t.text);
                self.report(self.error_at(pos, msg));
                self.skip_to_section();
                continue;
            }
            match t.text.as_str() {
                "end" if wrapped => {
                    self.bump();
                    if let Some(name) = &m.name {
                        if self.at_ident() {
                            let (closing, cpos) = self.ident().unwrap();
                            if &closing != name {
                                let msg = format!("module '{name}' closed as '{closing}'");
                                self.report(self.error_at(cpos, msg));
                            }
                        }
                    }
                    break;
                }
                "state" => match self.state_definition() {
                    Ok(s) => {
                        if m.state.is_some() {
                            self.report(self.error_at(s.pos, "a module may have only one state definition"));
                        } else {
                            m.state = Some(s);
                        }
                    }
                    Err(e) => {
                        self.report(e);
                        self.skip_to_section();
                    }
                },
                "types" => {
                    self.bump();
                    self.definitions(|p, m| p.type_definition(m), &mut m);
                }
                "values" => {
                    self.bump();
                    self.definitions(
                        |p, m| {
                            let v = p.value_definition()?;
                            m.values.push(v);
                            Ok(())
                        },
                        &mut m,
                    );
                }
                "functions" => {
                    self.bump();
                    self.definitions(
                        |p, m| {
                            let f = p.function_definition()?;
                            m.functions.push(f);
                            Ok(())
                        },
                        &mut m,
                    );
                }
                "operations" => {
                    self.bump();
                    self.definitions(
                        |p, m| {
                            let o = p.operation_definition()?;
                            m.operations.push(o);
                            Ok(())
                        },
                        &mut m,
                    );
                }
                "traces" => {
                    self.report(self.error_at(pos, "unsupported construct: traces are out of scope"));
                    self.bump();
                    self.skip_to_section();
                }
                other => {
                    let msg = format!("expected a definition section, found '{other}'");
                    self.report(self.error_at(pos, msg));
                    self.bump();
                    self.skip_to_section();
                }
            }
        }
        m
    }

    fn at_section(&self) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Keyword && SECTION_KEYWORDS.contains(&t.text.as_str()))
    }

    fn at_definition_start(&self) -> bool {
        self.at_ident() || self.at_keyword("pure")
    }

    fn skip_to_section(&mut self) {
        while self.peek().is_some() && !self.at_section() {
            self.bump();
        }
    }

    /// Skips past the failed definition to the next one in the section.
    fn recover_definition(&mut self) {
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Keyword && SECTION_KEYWORDS.contains(&t.text.as_str()) && t.text != "end" {
                return;
            }
            if t.is_symbol(";") {
                let next = self.peek_at(1);
                let resumes = match next {
                    None => true,
                    Some(n) => {
                        n.kind == TokenKind::Identifier
                            || n.is_keyword("pure")
                            || (n.kind == TokenKind::Keyword && SECTION_KEYWORDS.contains(&n.text.as_str()))
                    }
                };
                self.bump();
                if resumes {
                    return;
                }
                continue;
            }
            self.bump();
        }
    }

    fn definitions(
        &mut self,
        mut one: impl FnMut(&mut Self, &mut ModuleDefinition) -> ParseResult<()>,
        m: &mut ModuleDefinition,
    ) {
        while self.at_definition_start() {
            match one(self, m) {
                Ok(()) => {
                    if !self.eat_symbol(";") && !self.at_section() && self.peek().is_some() {
                        let e = self.unexpected("';' after definition");
                        self.report(e);
                        self.recover_definition();
                    }
                }
                Err(e) => {
                    self.report(e);
                    self.recover_definition();
                }
            }
        }
    }

    fn fields(&mut self) -> ParseResult<Vec<Field>> {
        let mut fields = Vec::new();
        while self.at_ident() && self.peek_at(1).is_some_and(|t| t.is_symbol(":")) {
            let (name, pos) = self.ident()?;
            self.expect_symbol(":")?;
            let ty = self.ty()?;
            if fields.iter().any(|f: &Field| f.name == name) {
                return Err(self.error_at(pos, format!("duplicate field '{name}'")));
            }
            fields.push(Field { name, ty });
        }
        Ok(fields)
    }

    fn invariant_clause(&mut self) -> ParseResult<Invariant> {
        let pattern = self.pattern()?;
        self.expect_symbol("==")?;
        let body = self.expr()?;
        Ok(Invariant { pattern, body })
    }

    fn state_definition(&mut self) -> ParseResult<StateDefinition> {
        let pos = self.expect_keyword("state")?;
        let (name, _) = self.ident()?;
        self.expect_keyword("of")?;
        let fields = self.fields()?;
        let mut invariant = None;
        let mut init = None;
        loop {
            if self.eat_keyword("inv") {
                invariant = Some(self.invariant_clause()?);
            } else if self.eat_keyword("init") {
                init = Some(self.invariant_clause()?);
            } else {
                break;
            }
        }
        self.expect_keyword("end")?;
        self.eat_symbol(";");
        Ok(StateDefinition {
            name,
            fields,
            invariant,
            init,
            pos,
        })
    }

    fn type_definition(&mut self, m: &mut ModuleDefinition) -> ParseResult<()> {
        let (name, pos) = self.ident()?;
        if self.eat_symbol("::") {
            let fields = self.fields()?;
            let invariant = if self.eat_keyword("inv") {
                Some(self.invariant_clause()?)
            } else {
                None
            };
            m.types.push(RecordDefinition {
                name,
                fields,
                invariant,
                pos,
            });
            Ok(())
        } else if self.eat_symbol("=") {
            let ty = self.ty()?;
            if self.at_keyword("inv") {
                return Err(self.error_at(
                    self.here(),
                    "unsupported construct: invariants on non-record types are out of scope",
                ));
            }
            m.aliases.push(TypeAlias { name, ty, pos });
            Ok(())
        } else {
            Err(self.unexpected("'::' or '=' in type definition"))
        }
    }

    fn value_definition(&mut self) -> ParseResult<ValueDefinition> {
        let (name, pos) = self.binder()?;
        let ty = if self.eat_symbol(":") { Some(self.ty()?) } else { None };
        self.expect_symbol("=")?;
        let value = self.expr()?;
        Ok(ValueDefinition { name, ty, value, pos })
    }

    fn typed_params(&mut self) -> ParseResult<Vec<Param>> {
        self.expect_symbol("(")?;
        let mut params = Vec::new();
        if !self.at_symbol(")") {
            loop {
                let (name, pos) = self.binder()?;
                self.expect_symbol(":")?;
                let ty = self.ty()?;
                if params.iter().any(|p: &Param| p.name == name) {
                    return Err(self.error_at(pos, format!("duplicate parameter '{name}'")));
                }
                params.push(Param { name, ty });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        self.expect_symbol(")")?;
        Ok(params)
    }

    fn untyped_params(&mut self) -> ParseResult<Vec<(String, Pos)>> {
        self.expect_symbol("(")?;
        let mut names = Vec::new();
        if !self.at_symbol(")") {
            loop {
                names.push(self.binder()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        self.expect_symbol(")")?;
        Ok(names)
    }

    /// Parameter types from a signature, split to match the parameter count.
    fn split_params(&self, names: Vec<(String, Pos)>, domain: Option<Type>, pos: Pos) -> ParseResult<Vec<Param>> {
        let types = match (domain, names.len()) {
            (None, 0) => Vec::new(),
            (Some(t), 1) => vec![t],
            (Some(Type::Product(ts)), n) if ts.len() == n => ts,
            _ => {
                return Err(self.error_at(pos, "parameter count does not match the signature"));
            }
        };
        Ok(names
            .into_iter()
            .zip(types)
            .map(|((name, _), ty)| Param { name, ty })
            .collect())
    }

    fn function_definition(&mut self) -> ParseResult<FunctionDefinition> {
        let (name, pos) = self.binder()?;
        if self.at_symbol("(") {
            let params = self.typed_params()?;
            let (result_name, _) = self.binder()?;
            self.expect_symbol(":")?;
            let result_type = self.ty()?;
            self.expect_symbol("==")?;
            let body = self.expr()?;
            let (pre, post) = self.fn_conditions()?;
            Ok(FunctionDefinition {
                name,
                params,
                result_type,
                result_name: Some(result_name),
                total: false,
                body,
                pre,
                post,
                pos,
            })
        } else {
            self.expect_symbol(":")?;
            let (domain, total, result_type) = self.function_signature()?;
            let (again, apos) = self.ident()?;
            if again != name {
                return Err(self.error_at(apos, format!("expected definition of '{name}', found '{again}'")));
            }
            let names = self.untyped_params()?;
            let params = self.split_params(names, domain, apos)?;
            self.expect_symbol("==")?;
            let body = self.expr()?;
            let (pre, post) = self.fn_conditions()?;
            Ok(FunctionDefinition {
                name,
                params,
                result_type,
                result_name: None,
                total,
                body,
                pre,
                post,
                pos,
            })
        }
    }

    fn fn_conditions(&mut self) -> ParseResult<(Option<Expr>, Option<Expr>)> {
        let mut pre = None;
        let mut post = None;
        loop {
            if self.eat_keyword("pre") {
                pre = Some(self.expr()?);
            } else if self.eat_keyword("post") {
                post = Some(self.expr()?);
            } else if self.at_keyword("measure") {
                return Err(self.error_at(self.here(), "unsupported construct: measures are out of scope"));
            } else {
                break;
            }
        }
        Ok((pre, post))
    }

    /// `T1 * T2 -> R`, `() +> R`.
    fn function_signature(&mut self) -> ParseResult<(Option<Type>, bool, Type)> {
        let domain = if self.at_symbol("(") && self.peek_at(1).is_some_and(|t| t.is_symbol(")")) {
            self.bump();
            self.bump();
            None
        } else {
            Some(self.ty()?)
        };
        let total = if self.eat_symbol("+>") {
            true
        } else {
            self.expect_symbol("->")?;
            false
        };
        let result = self.ty()?;
        Ok((domain, total, result))
    }

    fn operation_definition(&mut self) -> ParseResult<OperationDefinition> {
        let is_pure = self.eat_keyword("pure");
        let (name, pos) = self.binder()?;
        let (params, result_name, result_type) = if self.at_symbol("(") {
            let params = self.typed_params()?;
            let (result_name, result_type) = if self.at_ident() {
                let (r, _) = self.binder()?;
                self.expect_symbol(":")?;
                (Some(r), Some(self.ty()?))
            } else {
                (None, None)
            };
            (params, result_name, result_type)
        } else {
            self.expect_symbol(":")?;
            let domain = if self.at_symbol("(") && self.peek_at(1).is_some_and(|t| t.is_symbol(")")) {
                self.bump();
                self.bump();
                None
            } else {
                Some(self.ty()?)
            };
            self.expect_symbol("==>")?;
            let result_type = if self.at_symbol("(") && self.peek_at(1).is_some_and(|t| t.is_symbol(")")) {
                self.bump();
                self.bump();
                None
            } else {
                Some(self.ty()?)
            };
            let (again, apos) = self.ident()?;
            if again != name {
                return Err(self.error_at(apos, format!("expected definition of '{name}', found '{again}'")));
            }
            let names = self.untyped_params()?;
            (self.split_params(names, domain, apos)?, None, result_type)
        };
        self.expect_symbol("==")?;
        let body = self.statement()?;
        let mut pre = None;
        let mut post = None;
        let mut ext = None;
        loop {
            if self.eat_keyword("pre") {
                pre = Some(self.expr()?);
            } else if self.eat_keyword("post") {
                post = Some(self.expr()?);
            } else if self.at_keyword("ext") {
                ext = Some(self.ext_clauses()?);
            } else {
                break;
            }
        }
        Ok(OperationDefinition {
            name,
            params,
            result_name,
            result_type,
            body,
            pre,
            post,
            ext,
            is_pure,
            pos,
        })
    }

    fn ext_clauses(&mut self) -> ParseResult<Vec<ExtClause>> {
        self.expect_keyword("ext")?;
        let mut clauses = Vec::new();
        loop {
            let mode = if self.eat_keyword("rd") {
                ExtMode::Rd
            } else if self.eat_keyword("wr") {
                ExtMode::Wr
            } else {
                break;
            };
            let mut variables = vec![self.ident()?.0];
            while self.eat_symbol(",") {
                variables.push(self.ident()?.0);
            }
            if self.eat_symbol(":") {
                self.ty()?;
            }
            clauses.push(ExtClause { mode, variables });
        }
        if clauses.is_empty() {
            return Err(self.unexpected("'rd' or 'wr'"));
        }
        Ok(clauses)
    }

    // ---- types ----

    pub fn ty(&mut self) -> ParseResult<Type> {
        let first = self.basic_type()?;
        if !self.at_symbol("*") {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat_symbol("*") {
            parts.push(self.basic_type()?);
        }
        Ok(Type::Product(parts))
    }

    fn basic_type(&mut self) -> ParseResult<Type> {
        let t = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.unexpected("a type")),
        };
        match (t.kind, t.text.as_str()) {
            (TokenKind::Keyword, "nat") => {
                self.bump();
                Ok(Type::Nat)
            }
            (TokenKind::Keyword, "nat1") => {
                self.bump();
                Ok(Type::Nat1)
            }
            (TokenKind::Keyword, "int") => {
                self.bump();
                Ok(Type::Int)
            }
            (TokenKind::Keyword, "real") | (TokenKind::Keyword, "rat") => {
                self.bump();
                Ok(Type::Real)
            }
            (TokenKind::Keyword, "bool") => {
                self.bump();
                Ok(Type::Bool)
            }
            (TokenKind::Keyword, "seq") => {
                self.bump();
                self.expect_keyword("of")?;
                Ok(Type::seq(self.basic_type()?))
            }
            (TokenKind::Keyword, "set") => {
                self.bump();
                self.expect_keyword("of")?;
                Ok(Type::set(self.basic_type()?))
            }
            (TokenKind::Keyword, "map") => {
                self.bump();
                let d = self.basic_type()?;
                self.expect_keyword("to")?;
                let r = self.basic_type()?;
                Ok(Type::map(d, r))
            }
            (TokenKind::Identifier, name) => {
                self.bump();
                Ok(Type::Named(name.to_string()))
            }
            (TokenKind::Symbol, "(") => {
                self.bump();
                let inner = self.ty()?;
                self.expect_symbol(")")?;
                Ok(inner)
            }
            (TokenKind::Keyword, other @ ("char" | "token" | "seq1" | "set1" | "inmap")) => {
                Err(self.error_at(t.pos, format!("unsupported construct: type '{other}' is out of scope")))
            }
            _ => Err(self.unexpected("a type")),
        }
    }

    // ---- statements ----

    pub fn statement(&mut self) -> ParseResult<Stmt> {
        let t = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.unexpected("a statement")),
        };
        let pos = t.pos;
        if t.kind == TokenKind::Keyword {
            if let Some((_, what)) = UNSUPPORTED_STATEMENTS.iter().find(|(k, _)| *k == t.text) {
                return Err(self.error_at(
                    pos,
                    format!("unsupported construct '{}': {what} is out of scope", t.text),
                ));
            }
            match t.text.as_str() {
                "skip" => {
                    self.bump();
                    return Ok(self.stmt(
                        StmtKind::Block {
                            dcls: Vec::new(),
                            body: Vec::new(),
                        },
                        pos,
                    ));
                }
                "if" => return self.if_statement(),
                "while" => {
                    self.bump();
                    let cond = self.expr()?;
                    self.expect_keyword("do")?;
                    let body = self.statement()?;
                    return Ok(self.stmt(
                        StmtKind::While {
                            cond,
                            body: Box::new(body),
                            invariant: None,
                        },
                        pos,
                    ));
                }
                "for" => return self.for_statement(),
                "atomic" => return self.atomic_statement(),
                "return" => {
                    self.bump();
                    let ends = match self.peek() {
                        None => true,
                        Some(n) => {
                            n.is_symbol(";")
                                || n.is_symbol(")")
                                || ["end", "else", "elseif", "pre", "post", "ext"]
                                    .iter()
                                    .any(|k| n.is_keyword(k))
                                || (n.kind == TokenKind::Keyword && SECTION_KEYWORDS.contains(&n.text.as_str()))
                        }
                    };
                    let value = if ends { None } else { Some(self.expr()?) };
                    return Ok(self.stmt(StmtKind::Return(value), pos));
                }
                _ => {}
            }
        }
        if t.is_symbol("(") {
            return self.block();
        }
        if t.kind == TokenKind::Identifier {
            return self.assign_or_call();
        }
        Err(self.unexpected("a statement"))
    }

    fn block(&mut self) -> ParseResult<Stmt> {
        let pos = self.expect_symbol("(")?;
        let mut dcls = Vec::new();
        while self.eat_keyword("dcl") {
            loop {
                let (name, dpos) = self.binder()?;
                self.expect_symbol(":")?;
                let ty = self.ty()?;
                let init = if self.eat_symbol(":=") {
                    Some(self.expr()?)
                } else {
                    None
                };
                dcls.push(Dcl {
                    name,
                    ty,
                    init,
                    pos: dpos,
                });
                if !self.eat_symbol(",") {
                    break;
                }
            }
            self.expect_symbol(";")?;
        }
        let mut body = Vec::new();
        while !self.at_symbol(")") {
            body.push(self.statement()?);
            if !self.eat_symbol(";") {
                break;
            }
        }
        self.expect_symbol(")")?;
        Ok(self.stmt(StmtKind::Block { dcls, body }, pos))
    }

    fn if_statement(&mut self) -> ParseResult<Stmt> {
        let pos = self.here();
        // `if` or `elseif`
        self.bump();
        let cond = self.expr()?;
        self.expect_keyword("then")?;
        let then = self.statement()?;
        let els = if self.at_keyword("elseif") {
            Some(Box::new(self.if_statement()?))
        } else if self.eat_keyword("else") {
            Some(Box::new(self.statement()?))
        } else {
            None
        };
        Ok(self.stmt(
            StmtKind::If {
                cond,
                then: Box::new(then),
                els,
            },
            pos,
        ))
    }

    fn for_statement(&mut self) -> ParseResult<Stmt> {
        let pos = self.expect_keyword("for")?;
        if self.at_keyword("all") {
            return Err(self.error_at(pos, "unsupported construct: 'for all' set loops are out of scope"));
        }
        let (var, _) = self.binder()?;
        if self.eat_symbol("=") {
            let from = self.expr()?;
            self.expect_keyword("to")?;
            let to = self.expr()?;
            let by = if self.eat_keyword("by") {
                Some(self.expr()?)
            } else {
                None
            };
            self.expect_keyword("do")?;
            let body = self.statement()?;
            Ok(self.stmt(
                StmtKind::ForIndex {
                    var,
                    from,
                    to,
                    by,
                    body: Box::new(body),
                    invariant: None,
                },
                pos,
            ))
        } else {
            self.expect_keyword("in")?;
            if self.at_keyword("reverse") {
                return Err(self.error_at(self.here(), "unsupported construct: 'reverse' loops are out of scope"));
            }
            let seq = self.expr()?;
            self.expect_keyword("do")?;
            let body = self.statement()?;
            Ok(self.stmt(
                StmtKind::ForSeq {
                    var,
                    seq,
                    body: Box::new(body),
                    invariant: None,
                },
                pos,
            ))
        }
    }

    fn atomic_statement(&mut self) -> ParseResult<Stmt> {
        let pos = self.expect_keyword("atomic")?;
        self.expect_symbol("(")?;
        let mut assigns = Vec::new();
        while !self.at_symbol(")") {
            let target = self.designator()?;
            self.expect_symbol(":=")?;
            let rhs = self.expr()?;
            assigns.push((target, rhs));
            if !self.eat_symbol(";") {
                break;
            }
        }
        self.expect_symbol(")")?;
        if assigns.len() < 2 {
            return Err(self.error_at(pos, "atomic statements need at least two assignments"));
        }
        Ok(self.stmt(StmtKind::Atomic(assigns), pos))
    }

    fn designator(&mut self) -> ParseResult<Designator> {
        let (name, pos) = self.ident()?;
        let mut d = Designator::Name { name, pos };
        loop {
            if self.eat_symbol("(") {
                let index = self.expr()?;
                self.expect_symbol(")")?;
                d = Designator::Index {
                    base: Box::new(d),
                    index,
                };
            } else if self.at_symbol(".") {
                let fpos = self.expect_symbol(".")?;
                let (field, _) = self.ident()?;
                d = Designator::Field {
                    base: Box::new(d),
                    field,
                    pos: fpos,
                };
            } else {
                return Ok(d);
            }
        }
    }

    fn assign_or_call(&mut self) -> ParseResult<Stmt> {
        enum Step {
            Args(Vec<Expr>, Pos),
            Field(String, Pos),
        }
        let (name, pos) = self.ident()?;
        let mut steps = Vec::new();
        loop {
            if self.at_symbol("(") {
                let p = self.expect_symbol("(")?;
                let args = self.expr_list(")")?;
                self.expect_symbol(")")?;
                steps.push(Step::Args(args, p));
            } else if self.at_symbol(".") {
                let p = self.expect_symbol(".")?;
                let (f, _) = self.ident()?;
                steps.push(Step::Field(f, p));
            } else {
                break;
            }
        }
        if self.at_symbol(":=") {
            let mut d = Designator::Name {
                name: name.clone(),
                pos,
            };
            for s in steps {
                d = match s {
                    Step::Args(mut args, p) => {
                        if args.len() != 1 {
                            return Err(self.error_at(p, "a state designator index takes exactly one argument"));
                        }
                        Designator::Index {
                            base: Box::new(d),
                            index: args.pop().unwrap(),
                        }
                    }
                    Step::Field(field, p) => Designator::Field {
                        base: Box::new(d),
                        field,
                        pos: p,
                    },
                };
            }
            self.bump();
            let rhs = self.expr()?;
            return Ok(self.stmt(StmtKind::Assign { target: d, rhs }, pos));
        }
        match steps.as_slice() {
            [Step::Args(args, _)] => {
                let args = args.clone();
                Ok(self.stmt(
                    StmtKind::Call {
                        callee: name,
                        args,
                        assign_to: None,
                    },
                    pos,
                ))
            }
            _ => Err(self.unexpected("':=' or an operation call")),
        }
    }

    // ---- expressions ----

    fn expr_list(&mut self, close: &str) -> ParseResult<Vec<Expr>> {
        let mut items = Vec::new();
        if self.at_symbol(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if !self.eat_symbol(",") {
                break;
            }
        }
        Ok(items)
    }

    pub fn expr(&mut self) -> ParseResult<Expr> {
        let lhs = self.implies()?;
        if self.at_symbol("<=>") {
            let pos = self.expect_symbol("<=>")?;
            let rhs = self.expr()?;
            return Ok(Expr::binary(BinaryOp::Iff, lhs, rhs, pos));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> ParseResult<Expr> {
        let lhs = self.or()?;
        if self.at_symbol("=>") {
            let pos = self.expect_symbol("=>")?;
            let rhs = self.implies()?;
            return Ok(Expr::binary(BinaryOp::Implies, lhs, rhs, pos));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.and()?;
        while self.at_keyword("or") {
            let pos = self.expect_keyword("or")?;
            let rhs = self.and()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.not()?;
        while self.at_keyword("and") {
            let pos = self.expect_keyword("and")?;
            let rhs = self.not()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> ParseResult<Expr> {
        if self.at_keyword("not") {
            let pos = self.expect_keyword("not")?;
            let operand = self.not()?;
            return Ok(Expr::unary(UnaryOp::Not, operand, pos));
        }
        self.relation()
    }

    fn relation(&mut self) -> ParseResult<Expr> {
        let lhs = self.evaluator()?;
        let t = match self.peek() {
            Some(t) => t.clone(),
            None => return Ok(lhs),
        };
        let op = match (t.kind, t.text.as_str()) {
            (TokenKind::Symbol, "=") => Some(BinaryOp::Eq),
            (TokenKind::Symbol, "<>") => Some(BinaryOp::Ne),
            (TokenKind::Symbol, "<") => Some(BinaryOp::Lt),
            (TokenKind::Symbol, ">") => Some(BinaryOp::Gt),
            (TokenKind::Symbol, "<=") => Some(BinaryOp::Le),
            (TokenKind::Symbol, ">=") => Some(BinaryOp::Ge),
            (TokenKind::Keyword, "subset") => Some(BinaryOp::Subset),
            (TokenKind::Keyword, "in") if self.peek_at(1).is_some_and(|n| n.is_keyword("set")) => {
                self.bump();
                Some(BinaryOp::InSet)
            }
            (TokenKind::Keyword, "not")
                if self.peek_at(1).is_some_and(|n| n.is_keyword("in"))
                    && self.peek_at(2).is_some_and(|n| n.is_keyword("set")) =>
            {
                self.bump();
                self.bump();
                Some(BinaryOp::NotInSet)
            }
            _ => None,
        };
        match op {
            Some(op) => {
                self.bump();
                let rhs = self.evaluator()?;
                Ok(Expr::binary(op, lhs, rhs, t.pos))
            }
            None => Ok(lhs),
        }
    }

    fn evaluator(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let t = match self.peek() {
                Some(t) => t.clone(),
                None => return Ok(lhs),
            };
            let op = match (t.kind, t.text.as_str()) {
                (TokenKind::Symbol, "+") => BinaryOp::Add,
                (TokenKind::Symbol, "-") => BinaryOp::Sub,
                (TokenKind::Symbol, "^") => BinaryOp::Concat,
                (TokenKind::Symbol, "\\") => BinaryOp::Difference,
                (TokenKind::Keyword, "union") => BinaryOp::Union,
                (TokenKind::Symbol, "++") => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::new(
                        ExprKind::Override {
                            base: Box::new(lhs),
                            with: Box::new(rhs),
                        },
                        t.pos,
                    );
                    continue;
                }
                (TokenKind::Keyword, "munion") => {
                    return Err(self.error_at(t.pos, "unsupported construct: 'munion' is out of scope"))
                }
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs, t.pos);
        }
    }

    fn term(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let t = match self.peek() {
                Some(t) => t.clone(),
                None => return Ok(lhs),
            };
            let op = match (t.kind, t.text.as_str()) {
                (TokenKind::Symbol, "*") => BinaryOp::Mul,
                (TokenKind::Symbol, "/") => BinaryOp::Div,
                (TokenKind::Keyword, "div") => BinaryOp::IntDiv,
                (TokenKind::Keyword, "mod") => BinaryOp::Mod,
                (TokenKind::Keyword, "rem") => BinaryOp::Rem,
                (TokenKind::Keyword, "inter") => BinaryOp::Inter,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs, t.pos);
        }
    }

    fn unary(&mut self) -> ParseResult<Expr> {
        let t = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.unexpected("an expression")),
        };
        let op = match (t.kind, t.text.as_str()) {
            (TokenKind::Symbol, "-") => Some(UnaryOp::Neg),
            (TokenKind::Symbol, "+") => Some(UnaryOp::Plus),
            (TokenKind::Keyword, "len") => Some(UnaryOp::Len),
            (TokenKind::Keyword, "dom") => Some(UnaryOp::Dom),
            (TokenKind::Keyword, "rng") => Some(UnaryOp::Rng),
            (TokenKind::Keyword, "hd") => Some(UnaryOp::Hd),
            (TokenKind::Keyword, "tl") => Some(UnaryOp::Tl),
            (TokenKind::Keyword, "inds") => Some(UnaryOp::Inds),
            (TokenKind::Keyword, "elems") => Some(UnaryOp::Elems),
            (TokenKind::Keyword, "card") => Some(UnaryOp::Card),
            (TokenKind::Keyword, "abs") => Some(UnaryOp::Abs),
            (TokenKind::Keyword, "floor") => Some(UnaryOp::Floor),
            _ => None,
        };
        match op {
            Some(op) => {
                self.bump();
                let operand = self.unary()?;
                Ok(Expr::unary(op, operand, t.pos))
            }
            None => self.postfix(),
        }
    }

    fn postfix(&mut self) -> ParseResult<Expr> {
        let bracketed = self.at_symbol("(");
        let mut e = self.primary()?;
        // An open form such as `let ... in body` extends as far right as
        // possible, so only a bracketed one takes postfix operators.
        if !bracketed
            && matches!(
                e.kind,
                ExprKind::Let { .. } | ExprKind::LetFunctions { .. } | ExprKind::Forall { .. } | ExprKind::If { .. }
            )
        {
            return Ok(e);
        }
        loop {
            if self.at_symbol("(") {
                self.bump();
                let args = self.expr_list(")")?;
                self.expect_symbol(")")?;
                let pos = e.pos;
                e = Expr::apply(e, args, pos);
            } else if self.at_symbol(".") {
                let pos = self.expect_symbol(".")?;
                let (field, _) = self.ident()?;
                e = Expr::new(
                    ExprKind::Field {
                        record: Box::new(e),
                        field,
                    },
                    pos,
                );
            } else if self.at_symbol("~") {
                let pos = self.here();
                match &e.kind {
                    ExprKind::Var(n) => {
                        let n = n.clone();
                        self.bump();
                        e = Expr::new(ExprKind::Old(n), e.pos);
                    }
                    _ => return Err(self.error_at(pos, "'~' may only follow a variable name")),
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> ParseResult<Expr> {
        let t = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.unexpected("an expression")),
        };
        let pos = t.pos;
        match t.kind {
            TokenKind::Number => {
                self.bump();
                Ok(Expr::number(&t.text, pos))
            }
            TokenKind::Text => Err(self.error_at(pos, "unsupported construct: text literals are out of scope")),
            TokenKind::Identifier => {
                self.bump();
                if t.text == "mk_" {
                    self.expect_symbol("(")?;
                    let args = self.expr_list(")")?;
                    self.expect_symbol(")")?;
                    if args.len() < 2 {
                        return Err(self.error_at(pos, "a tuple needs at least two components"));
                    }
                    return Ok(Expr::new(ExprKind::MkTuple(args), pos));
                }
                if let Some(rest) = t.text.strip_prefix("mk_") {
                    let (name, maximal) = match rest.strip_suffix('!') {
                        Some(n) => (n.to_string(), true),
                        None => (rest.to_string(), false),
                    };
                    self.expect_symbol("(")?;
                    let args = self.expr_list(")")?;
                    self.expect_symbol(")")?;
                    return Ok(Expr::new(ExprKind::MkRecord { name, maximal, args }, pos));
                }
                Ok(Expr::var(&t.text, pos))
            }
            TokenKind::Keyword => match t.text.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::new(ExprKind::Bool(t.text == "true"), pos))
                }
                "let" => self.let_expr(),
                "forall" => self.forall_expr(),
                "if" => self.if_expr(),
                "mu" => {
                    self.bump();
                    self.expect_symbol("(")?;
                    let record = self.expr()?;
                    let mut updates = Vec::new();
                    while self.eat_symbol(",") {
                        let (f, _) = self.ident()?;
                        self.expect_symbol("|->")?;
                        updates.push((f, self.expr()?));
                    }
                    self.expect_symbol(")")?;
                    if updates.is_empty() {
                        return Err(self.error_at(pos, "mu needs at least one field update"));
                    }
                    Ok(Expr::new(
                        ExprKind::Mu {
                            record: Box::new(record),
                            updates,
                        },
                        pos,
                    ))
                }
                other @ ("exists" | "exists1" | "lambda" | "iota" | "cases" | "nil" | "is") => {
                    Err(self.error_at(pos, format!("unsupported construct '{other}' is out of scope")))
                }
                _ => Err(self.unexpected("an expression")),
            },
            TokenKind::Symbol => match t.text.as_str() {
                "(" => {
                    self.bump();
                    let e = self.expr()?;
                    self.expect_symbol(")")?;
                    Ok(e)
                }
                "[" => {
                    self.bump();
                    let items = self.expr_list("]")?;
                    self.expect_symbol("]")?;
                    Ok(Expr::new(ExprKind::SeqEnum(items), pos))
                }
                "{" => {
                    self.bump();
                    if self.eat_symbol("}") {
                        return Ok(Expr::new(ExprKind::SetEnum(Vec::new()), pos));
                    }
                    if self.eat_symbol("|->") {
                        self.expect_symbol("}")?;
                        return Ok(Expr::new(ExprKind::MapEnum(Vec::new()), pos));
                    }
                    let first = self.expr()?;
                    if self.eat_symbol("|->") {
                        let v = self.expr()?;
                        let mut pairs = vec![(first, v)];
                        while self.eat_symbol(",") {
                            let k = self.expr()?;
                            self.expect_symbol("|->")?;
                            pairs.push((k, self.expr()?));
                        }
                        self.expect_symbol("}")?;
                        Ok(Expr::new(ExprKind::MapEnum(pairs), pos))
                    } else {
                        let mut items = vec![first];
                        while self.eat_symbol(",") {
                            items.push(self.expr()?);
                        }
                        if self.at_symbol("|") || self.at_symbol("...") {
                            return Err(self.error_at(
                                self.here(),
                                "unsupported construct: set comprehensions and ranges are out of scope",
                            ));
                        }
                        self.expect_symbol("}")?;
                        Ok(Expr::new(ExprKind::SetEnum(items), pos))
                    }
                }
                _ => Err(self.unexpected("an expression")),
            },
            TokenKind::Comment => Err(self.unexpected("an expression")),
        }
    }

    pub fn pattern(&mut self) -> ParseResult<Pattern> {
        let (name, pos) = self.ident()?;
        if name == "mk_" {
            self.expect_symbol("(")?;
            let ps = self.pattern_list()?;
            self.expect_symbol(")")?;
            return Ok(Pattern::Tuple(ps));
        }
        if let Some(rec) = name.strip_prefix("mk_") {
            if rec.ends_with('!') {
                return Err(self.error_at(pos, "maximal constructors cannot be used as patterns"));
            }
            self.expect_symbol("(")?;
            let ps = self.pattern_list()?;
            self.expect_symbol(")")?;
            return Ok(Pattern::Record {
                name: rec.to_string(),
                fields: ps,
            });
        }
        if name == RESULT_NAME {
            return Err(self.error_at(pos, "RESULT is a reserved name and cannot be declared"));
        }
        Ok(Pattern::Ident(name))
    }

    fn pattern_list(&mut self) -> ParseResult<Vec<Pattern>> {
        let mut ps = vec![self.pattern()?];
        while self.eat_symbol(",") {
            ps.push(self.pattern()?);
        }
        Ok(ps)
    }

    fn let_expr(&mut self) -> ParseResult<Expr> {
        enum Def {
            Value(Pattern, Option<Type>, Expr, Pos),
            Function(FunctionDefinition),
        }
        let pos = self.expect_keyword("let")?;
        let mut defs = Vec::new();
        loop {
            let is_typed = self.at_ident() && self.peek_at(1).is_some_and(|t| t.is_symbol(":"));
            if is_typed {
                let (name, npos) = self.binder()?;
                self.expect_symbol(":")?;
                // Either `x : T = e` or `f: T +> R f(a) == body`.
                let start = self.idx;
                let ty = self.ty()?;
                if self.eat_symbol("=") {
                    let value = self.expr()?;
                    defs.push(Def::Value(Pattern::Ident(name), Some(ty), value, npos));
                } else {
                    self.idx = start;
                    let (domain, total, result_type) = self.function_signature()?;
                    let (again, apos) = self.ident()?;
                    if again != name {
                        return Err(self.error_at(apos, format!("expected definition of '{name}', found '{again}'")));
                    }
                    let names = self.untyped_params()?;
                    let params = self.split_params(names, domain, apos)?;
                    self.expect_symbol("==")?;
                    let body = self.expr()?;
                    let pre = if self.eat_keyword("pre") {
                        Some(self.expr()?)
                    } else {
                        None
                    };
                    defs.push(Def::Function(FunctionDefinition {
                        name,
                        params,
                        result_type,
                        result_name: None,
                        total,
                        body,
                        pre,
                        post: None,
                        pos: npos,
                    }));
                }
            } else {
                let ppos = self.here();
                let pattern = self.pattern()?;
                if self.at_keyword("be") {
                    return Err(self.error_at(self.here(), "unsupported construct: 'let be st' is out of scope"));
                }
                self.expect_symbol("=")?;
                let value = self.expr()?;
                defs.push(Def::Value(pattern, None, value, ppos));
            }
            if !self.eat_symbol(",") {
                break;
            }
        }
        self.expect_keyword("in")?;
        let body = self.expr()?;
        let functions = defs.iter().filter(|d| matches!(d, Def::Function(_))).count();
        if functions > 0 {
            if functions != defs.len() {
                return Err(self.error_at(pos, "a let cannot mix function and value definitions"));
            }
            let fdefs = defs
                .into_iter()
                .map(|d| match d {
                    Def::Function(f) => f,
                    Def::Value(..) => unreachable!(),
                })
                .collect();
            return Ok(Expr::new(
                ExprKind::LetFunctions {
                    defs: fdefs,
                    body: Box::new(body),
                },
                pos,
            ));
        }
        let mut e = body;
        for d in defs.into_iter().rev() {
            if let Def::Value(pattern, ty, value, p) = d {
                e = Expr::new(
                    ExprKind::Let {
                        pattern,
                        ty,
                        value: Box::new(value),
                        body: Box::new(e),
                    },
                    p,
                );
            }
        }
        e.pos = pos;
        Ok(e)
    }

    fn forall_expr(&mut self) -> ParseResult<Expr> {
        let pos = self.expect_keyword("forall")?;
        let mut binds = Vec::new();
        loop {
            let mut group = vec![self.pattern()?];
            while self.eat_symbol(",") {
                group.push(self.pattern()?);
            }
            if self.at_keyword("in") {
                return Err(self.error_at(self.here(), "unsupported construct: set binds are out of scope"));
            }
            self.expect_symbol(":")?;
            let ty = self.ty()?;
            binds.extend(group.into_iter().map(|pattern| Bind {
                pattern,
                ty: ty.clone(),
            }));
            if !self.eat_symbol(",") {
                break;
            }
        }
        self.expect_symbol("&")?;
        let body = self.expr()?;
        Ok(Expr::new(
            ExprKind::Forall {
                binds,
                body: Box::new(body),
            },
            pos,
        ))
    }

    fn if_expr(&mut self) -> ParseResult<Expr> {
        let pos = self.here();
        self.bump();
        let cond = self.expr()?;
        self.expect_keyword("then")?;
        let then = self.expr()?;
        let els = if self.at_keyword("elseif") {
            self.if_expr()?
        } else {
            self.expect_keyword("else")?;
            self.expr()?
        };
        Ok(Expr::new(
            ExprKind::If {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
            },
            pos,
        ))
    }
}

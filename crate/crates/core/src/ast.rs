//! Abstract syntax for the supported VDM-SL subset and the obligation data
//! model shared by the frontend, analysis, generator and discharger.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// A line/column position inside a source file. Both are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

impl Pos {
    pub const fn new(line: u32, column: u32) -> Self {
        Pos { line, column }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// A position qualified by the file it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceLocation {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl SourceLocation {
    pub fn pos(&self) -> Pos {
        Pos::new(self.line, self.column)
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// Builds a location. Lines and columns start at 1.
pub fn mk_location(file: &str, line: u32, column: u32) -> SourceLocation {
    assert!(line >= 1, "line numbers start at 1");
    assert!(column >= 1, "column numbers start at 1");
    SourceLocation {
        file: Arc::from(file),
        line,
        column,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Nat,
    Nat1,
    Int,
    Real,
    Bool,
    Seq(Box<Type>),
    Set(Box<Type>),
    Map(Box<Type>, Box<Type>),
    /// A record, the state record, or a type alias, looked up by name.
    Named(String),
    Product(Vec<Type>),
    /// Element type of empty enumerations such as `[]`; compatible with anything.
    Any,
}

impl Type {
    pub fn seq(t: Type) -> Type {
        Type::Seq(Box::new(t))
    }

    pub fn set(t: Type) -> Type {
        Type::Set(Box::new(t))
    }

    pub fn map(d: Type, r: Type) -> Type {
        Type::Map(Box::new(d), Box::new(r))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Nat | Type::Nat1 | Type::Int | Type::Real)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub ty: Type,
}

/// An `inv`/`init` clause: `inv p == body`.
#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub pattern: Pattern,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordDefinition {
    pub name: String,
    pub fields: Vec<Field>,
    pub invariant: Option<Invariant>,
    pub pos: Pos,
}

impl RecordDefinition {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

/// `Name = Type;` in a types section.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeAlias {
    pub name: String,
    pub ty: Type,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDefinition {
    pub name: String,
    pub fields: Vec<Field>,
    pub invariant: Option<Invariant>,
    pub init: Option<Invariant>,
    pub pos: Pos,
}

impl StateDefinition {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// The state viewed as a record type.
    pub fn as_record(&self) -> RecordDefinition {
        RecordDefinition {
            name: self.name.clone(),
            fields: self.fields.clone(),
            invariant: self.invariant.clone(),
            pos: self.pos,
        }
    }

    /// `mk_Sigma(f1, ..., fn)` as a pattern naming every field.
    pub fn record_pattern(&self) -> Pattern {
        Pattern::Record {
            name: self.name.clone(),
            fields: self.fields.iter().map(|f| Pattern::Ident(f.name.clone())).collect(),
        }
    }

    /// `mk_Sigma(f1, ..., fn)` (or `mk_Sigma!(...)`) as an expression over
    /// the field names.
    pub fn record_expr(&self, maximal: bool, pos: Pos) -> Expr {
        Expr::new(
            ExprKind::MkRecord {
                name: self.name.clone(),
                maximal,
                args: self.fields.iter().map(|f| Expr::var(&f.name, pos)).collect(),
            },
            pos,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueDefinition {
    pub name: String,
    pub ty: Option<Type>,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    IntDiv,
    Mod,
    Rem,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
    Implies,
    Iff,
    InSet,
    NotInSet,
    Subset,
    Union,
    Inter,
    Difference,
    Concat,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        use BinaryOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            IntDiv => "div",
            Mod => "mod",
            Rem => "rem",
            Eq => "=",
            Ne => "<>",
            Lt => "<",
            Gt => ">",
            Le => "<=",
            Ge => ">=",
            And => "and",
            Or => "or",
            Implies => "=>",
            Iff => "<=>",
            InSet => "in set",
            NotInSet => "not in set",
            Subset => "subset",
            Union => "union",
            Inter => "inter",
            Difference => "\\",
            Concat => "^",
        }
    }

    /// Binding strength, higher binds tighter.
    pub fn precedence(self) -> u8 {
        use BinaryOp::*;
        match self {
            Iff => 1,
            Implies => 2,
            Or => 3,
            And => 4,
            Eq | Ne | Lt | Gt | Le | Ge | InSet | NotInSet | Subset => 6,
            Add | Sub | Union | Difference | Concat => 7,
            Mul | Div | IntDiv | Mod | Rem | Inter => 8,
        }
    }

    /// True for operators whose right operand is partial in its divisor.
    pub fn is_division(self) -> bool {
        matches!(self, BinaryOp::Div | BinaryOp::IntDiv | BinaryOp::Mod | BinaryOp::Rem)
    }
}

/// Precedence of `++`, which shares the additive level.
pub const OVERRIDE_PRECEDENCE: u8 = 7;
/// Precedence of `not`.
pub const NOT_PRECEDENCE: u8 = 5;
/// Precedence of prefix operators such as `len`.
pub const UNARY_PRECEDENCE: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
    Plus,
    Len,
    Dom,
    Rng,
    Hd,
    Tl,
    Inds,
    Elems,
    Card,
    Abs,
    Floor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        use UnaryOp::*;
        match self {
            Not => "not",
            Neg => "-",
            Plus => "+",
            Len => "len",
            Dom => "dom",
            Rng => "rng",
            Hd => "hd",
            Tl => "tl",
            Inds => "inds",
            Elems => "elems",
            Card => "card",
            Abs => "abs",
            Floor => "floor",
        }
    }

    /// Keyword operators are followed by a space when rendered.
    pub fn is_word(self) -> bool {
        !matches!(self, UnaryOp::Neg | UnaryOp::Plus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Ident(String),
    Record { name: String, fields: Vec<Pattern> },
    Tuple(Vec<Pattern>),
}

impl Pattern {
    pub fn ident(name: &str) -> Pattern {
        Pattern::Ident(name.to_string())
    }

    /// Names bound by the pattern, left to right.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Ident(n) => out.push(n.clone()),
            Pattern::Record { fields, .. } => fields.iter().for_each(|p| p.collect_names(out)),
            Pattern::Tuple(ps) => ps.iter().for_each(|p| p.collect_names(out)),
        }
    }
}

/// A typed bind `p:T` as used by `forall`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bind {
    pub pattern: Pattern,
    pub ty: Type,
}

/// An expression node. Equality is structural and ignores positions.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// Decimal literal, kept as written (always non-negative).
    Number(String),
    Bool(bool),
    Var(String),
    /// `v~`, the entry value of a state variable inside a postcondition.
    Old(String),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    /// Function application or map/sequence lookup `f(x)`.
    Apply {
        root: Box<Expr>,
        args: Vec<Expr>,
    },
    Field {
        record: Box<Expr>,
        field: String,
    },
    MkRecord {
        name: String,
        maximal: bool,
        args: Vec<Expr>,
    },
    MkTuple(Vec<Expr>),
    Mu {
        record: Box<Expr>,
        updates: Vec<(String, Expr)>,
    },
    /// `base ++ with`, map or sequence override.
    Override {
        base: Box<Expr>,
        with: Box<Expr>,
    },
    SetEnum(Vec<Expr>),
    SeqEnum(Vec<Expr>),
    MapEnum(Vec<(Expr, Expr)>),
    Let {
        pattern: Pattern,
        ty: Option<Type>,
        value: Box<Expr>,
        body: Box<Expr>,
    },
    LetFunctions {
        defs: Vec<FunctionDefinition>,
        body: Box<Expr>,
    },
    Forall {
        binds: Vec<Bind>,
        body: Box<Expr>,
    },
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Expr {
        Expr { kind, pos }
    }

    pub fn var(name: &str, pos: Pos) -> Expr {
        Expr::new(ExprKind::Var(name.to_string()), pos)
    }

    pub fn number(text: &str, pos: Pos) -> Expr {
        Expr::new(ExprKind::Number(text.to_string()), pos)
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr, pos: Pos) -> Expr {
        Expr::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            pos,
        )
    }

    pub fn unary(op: UnaryOp, operand: Expr, pos: Pos) -> Expr {
        Expr::new(
            ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
            pos,
        )
    }

    pub fn apply(root: Expr, args: Vec<Expr>, pos: Pos) -> Expr {
        Expr::new(
            ExprKind::Apply {
                root: Box::new(root),
                args,
            },
            pos,
        )
    }

    pub fn call(name: &str, args: Vec<Expr>, pos: Pos) -> Expr {
        Expr::apply(Expr::var(name, pos), args, pos)
    }

    pub fn not(operand: Expr) -> Expr {
        let pos = operand.pos;
        Expr::unary(UnaryOp::Not, operand, pos)
    }

    pub fn let_in(pattern: Pattern, ty: Option<Type>, value: Expr, body: Expr) -> Expr {
        let pos = value.pos;
        Expr::new(
            ExprKind::Let {
                pattern,
                ty,
                value: Box::new(value),
                body: Box::new(body),
            },
            pos,
        )
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(n) => Some(n),
            _ => None,
        }
    }

    /// Every unbound variable name in the expression. Let, forall and
    /// function-parameter binders remove the names they bind.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    /// Free variables in first-occurrence order.
    pub fn free_variables_ordered(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut bound = Vec::new();
        walk_free(self, &mut bound, &mut |n| {
            if seen.insert(n.to_string()) {
                out.push(n.to_string());
            }
        });
        out
    }

    /// Applies `f` to this node and every descendant, parents first.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        self.for_each_child(&mut |c| c.visit(f));
    }

    pub fn for_each_child(&self, f: &mut dyn FnMut(&Expr)) {
        match &self.kind {
            ExprKind::Number(_) | ExprKind::Bool(_) | ExprKind::Var(_) | ExprKind::Old(_) => {}
            ExprKind::Binary { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            ExprKind::Unary { operand, .. } => f(operand),
            ExprKind::Apply { root, args } => {
                f(root);
                args.iter().for_each(|a| f(a));
            }
            ExprKind::Field { record, .. } => f(record),
            ExprKind::MkRecord { args, .. } | ExprKind::MkTuple(args) => args.iter().for_each(|a| f(a)),
            ExprKind::Mu { record, updates } => {
                f(record);
                updates.iter().for_each(|(_, v)| f(v));
            }
            ExprKind::Override { base, with } => {
                f(base);
                f(with);
            }
            ExprKind::SetEnum(es) | ExprKind::SeqEnum(es) => es.iter().for_each(|e| f(e)),
            ExprKind::MapEnum(ms) => ms.iter().for_each(|(k, v)| {
                f(k);
                f(v);
            }),
            ExprKind::Let { value, body, .. } => {
                f(value);
                f(body);
            }
            ExprKind::LetFunctions { defs, body } => {
                for d in defs {
                    f(&d.body);
                    if let Some(p) = &d.pre {
                        f(p);
                    }
                }
                f(body);
            }
            ExprKind::Forall { body, .. } => f(body),
            ExprKind::If { cond, then, els } => {
                f(cond);
                f(then);
                f(els);
            }
        }
    }

    /// Rebuilds the tree bottom-up, letting `f` replace any node after its
    /// children have been mapped.
    pub fn map_bottom_up(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let mut m = |e: &Expr| Box::new(e.map_bottom_up(f));
        let kind = match &self.kind {
            k @ (ExprKind::Number(_) | ExprKind::Bool(_) | ExprKind::Var(_) | ExprKind::Old(_)) => k.clone(),
            ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
                op: *op,
                lhs: m(lhs),
                rhs: m(rhs),
            },
            ExprKind::Unary { op, operand } => ExprKind::Unary {
                op: *op,
                operand: m(operand),
            },
            ExprKind::Apply { root, args } => ExprKind::Apply {
                root: m(root),
                args: args.iter().map(|a| *m(a)).collect(),
            },
            ExprKind::Field { record, field } => ExprKind::Field {
                record: m(record),
                field: field.clone(),
            },
            ExprKind::MkRecord { name, maximal, args } => ExprKind::MkRecord {
                name: name.clone(),
                maximal: *maximal,
                args: args.iter().map(|a| *m(a)).collect(),
            },
            ExprKind::MkTuple(args) => ExprKind::MkTuple(args.iter().map(|a| *m(a)).collect()),
            ExprKind::Mu { record, updates } => ExprKind::Mu {
                record: m(record),
                updates: updates.iter().map(|(n, v)| (n.clone(), *m(v))).collect(),
            },
            ExprKind::Override { base, with } => ExprKind::Override {
                base: m(base),
                with: m(with),
            },
            ExprKind::SetEnum(es) => ExprKind::SetEnum(es.iter().map(|e| *m(e)).collect()),
            ExprKind::SeqEnum(es) => ExprKind::SeqEnum(es.iter().map(|e| *m(e)).collect()),
            ExprKind::MapEnum(ms) => ExprKind::MapEnum(ms.iter().map(|(k, v)| (*m(k), *m(v))).collect()),
            ExprKind::Let {
                pattern,
                ty,
                value,
                body,
            } => ExprKind::Let {
                pattern: pattern.clone(),
                ty: ty.clone(),
                value: m(value),
                body: m(body),
            },
            ExprKind::LetFunctions { defs, body } => ExprKind::LetFunctions {
                defs: defs
                    .iter()
                    .map(|d| FunctionDefinition {
                        body: *m(&d.body),
                        pre: d.pre.as_ref().map(|p| *m(p)),
                        ..d.clone()
                    })
                    .collect(),
                body: m(body),
            },
            ExprKind::Forall { binds, body } => ExprKind::Forall {
                binds: binds.clone(),
                body: m(body),
            },
            ExprKind::If { cond, then, els } => ExprKind::If {
                cond: m(cond),
                then: m(then),
                els: m(els),
            },
        };
        f(Expr::new(kind, self.pos))
    }

    /// Replaces every `v~` with the variable `v$`.
    pub fn rewrite_old_names(&self) -> Expr {
        self.map_bottom_up(&mut |e| match &e.kind {
            ExprKind::Old(n) => Expr::var(&old_state_name(n), e.pos),
            _ => e,
        })
    }

    /// Names `v` for which `v~` occurs in the expression, in first-occurrence order.
    pub fn old_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.visit(&mut |e| {
            if let ExprKind::Old(n) = &e.kind {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }
}

/// The obligation-side name for the entry value of `v`.
pub fn old_state_name(v: &str) -> String {
    format!("{v}$")
}

fn collect_free(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    walk_free(e, bound, &mut |n| {
        out.insert(n.to_string());
    });
}

fn walk_free(e: &Expr, bound: &mut Vec<String>, emit: &mut dyn FnMut(&str)) {
    let is_bound = |bound: &Vec<String>, n: &str| bound.iter().any(|b| b == n);
    match &e.kind {
        ExprKind::Var(n) => {
            if !is_bound(bound, n) {
                emit(n);
            }
        }
        ExprKind::Old(n) => {
            let name = format!("{n}~");
            if !is_bound(bound, &name) {
                emit(&name);
            }
        }
        ExprKind::Let {
            pattern, value, body, ..
        } => {
            walk_free(value, bound, emit);
            let names = pattern.names();
            let depth = bound.len();
            bound.extend(names);
            walk_free(body, bound, emit);
            bound.truncate(depth);
        }
        ExprKind::LetFunctions { defs, body } => {
            let depth = bound.len();
            bound.extend(defs.iter().map(|d| d.name.clone()));
            for d in defs {
                let inner = bound.len();
                bound.extend(d.params.iter().map(|p| p.name.clone()));
                walk_free(&d.body, bound, emit);
                if let Some(p) = &d.pre {
                    walk_free(p, bound, emit);
                }
                bound.truncate(inner);
            }
            walk_free(body, bound, emit);
            bound.truncate(depth);
        }
        ExprKind::Forall { binds, body } => {
            let depth = bound.len();
            for b in binds {
                bound.extend(b.pattern.names());
            }
            walk_free(body, bound, emit);
            bound.truncate(depth);
        }
        _ => e.for_each_child(&mut |c| walk_free(c, bound, emit)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone)]
pub struct FunctionDefinition {
    pub name: String,
    pub params: Vec<Param>,
    pub result_type: Type,
    /// Set for the `f(a:T) r:R == ...` form; `None` for `f: T +> R f(a) == ...`.
    pub result_name: Option<String>,
    /// `+>` rather than `->` in the signature form.
    pub total: bool,
    pub body: Expr,
    pub pre: Option<Expr>,
    pub post: Option<Expr>,
    pub pos: Pos,
}

impl PartialEq for FunctionDefinition {
    fn eq(&self, o: &Self) -> bool {
        self.name == o.name
            && self.params == o.params
            && self.result_type == o.result_type
            && self.result_name == o.result_name
            && self.total == o.total
            && self.body == o.body
            && self.pre == o.pre
            && self.post == o.post
    }
}

/// Statement identity, unique within a parsed module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StmtId(pub u32);

#[derive(Debug, Clone)]
pub struct Stmt {
    pub id: StmtId,
    pub kind: StmtKind,
    pub pos: Pos,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dcl {
    pub name: String,
    pub ty: Type,
    pub init: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Block {
        dcls: Vec<Dcl>,
        body: Vec<Stmt>,
    },
    Assign {
        target: Designator,
        rhs: Expr,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
        invariant: Option<Expr>,
    },
    /// `for v = from to to [by step] do body`
    ForIndex {
        var: String,
        from: Expr,
        to: Expr,
        by: Option<Expr>,
        body: Box<Stmt>,
        invariant: Option<Expr>,
    },
    /// `for v in seq do body`
    ForSeq {
        var: String,
        seq: Expr,
        body: Box<Stmt>,
        invariant: Option<Expr>,
    },
    Atomic(Vec<(Designator, Expr)>),
    Return(Option<Expr>),
    Call {
        callee: String,
        args: Vec<Expr>,
        assign_to: Option<Designator>,
    },
}

impl Stmt {
    pub fn is_loop(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::While { .. } | StmtKind::ForIndex { .. } | StmtKind::ForSeq { .. }
        )
    }

    pub fn loop_invariant(&self) -> Option<&Expr> {
        match &self.kind {
            StmtKind::While { invariant, .. }
            | StmtKind::ForIndex { invariant, .. }
            | StmtKind::ForSeq { invariant, .. } => invariant.as_ref(),
            _ => None,
        }
    }

    /// Direct sub-statements.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Block { body, .. } => body.iter().collect(),
            StmtKind::If { then, els, .. } => {
                let mut v = vec![then.as_ref()];
                if let Some(e) = els {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. } | StmtKind::ForIndex { body, .. } | StmtKind::ForSeq { body, .. } => {
                vec![body.as_ref()]
            }
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Stmt> {
        match &mut self.kind {
            StmtKind::Block { body, .. } => body.iter_mut().collect(),
            StmtKind::If { then, els, .. } => {
                let mut v = vec![then.as_mut()];
                if let Some(e) = els {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. } | StmtKind::ForIndex { body, .. } | StmtKind::ForSeq { body, .. } => {
                vec![body.as_mut()]
            }
            _ => Vec::new(),
        }
    }

    /// Applies `f` to this statement and every nested statement.
    pub fn visit(&self, f: &mut dyn FnMut(&Stmt)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }
}

/// Assignment target: a variable refined by indexing and field selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Designator {
    Name {
        name: String,
        pos: Pos,
    },
    Index {
        base: Box<Designator>,
        index: Expr,
    },
    Field {
        base: Box<Designator>,
        field: String,
        pos: Pos,
    },
}

impl Designator {
    /// The single variable that the assignment updates.
    pub fn root(&self) -> &str {
        match self {
            Designator::Name { name, .. } => name,
            Designator::Index { base, .. } | Designator::Field { base, .. } => base.root(),
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Designator::Name { pos, .. } => *pos,
            Designator::Index { base, .. } | Designator::Field { base, .. } => base.pos(),
        }
    }

    /// The expression reading the designated value (`sv(1).size` etc.).
    pub fn to_expr(&self) -> Expr {
        match self {
            Designator::Name { name, pos } => Expr::var(name, *pos),
            Designator::Index { base, index } => {
                let b = base.to_expr();
                let pos = b.pos;
                Expr::apply(b, vec![index.clone()], pos)
            }
            Designator::Field { base, field, pos } => Expr::new(
                ExprKind::Field {
                    record: Box::new(base.to_expr()),
                    field: field.clone(),
                },
                *pos,
            ),
        }
    }

    pub fn index_exprs(&self) -> Vec<&Expr> {
        match self {
            Designator::Name { .. } => Vec::new(),
            Designator::Index { base, index } => {
                let mut v = base.index_exprs();
                v.push(index);
                v
            }
            Designator::Field { base, .. } => base.index_exprs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtMode {
    Rd,
    Wr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtClause {
    pub mode: ExtMode,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationDefinition {
    pub name: String,
    pub params: Vec<Param>,
    pub result_name: Option<String>,
    pub result_type: Option<Type>,
    pub body: Stmt,
    pub pre: Option<Expr>,
    pub post: Option<Expr>,
    pub ext: Option<Vec<ExtClause>>,
    pub is_pure: bool,
    pub pos: Pos,
}

impl OperationDefinition {
    /// Variables listed under `ext wr`, if there is an ext clause at all.
    pub fn ext_writes(&self) -> Option<Vec<String>> {
        self.ext.as_ref().map(|clauses| {
            clauses
                .iter()
                .filter(|c| c.mode == ExtMode::Wr)
                .flat_map(|c| c.variables.iter().cloned())
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModuleDefinition {
    pub name: Option<String>,
    pub state: Option<StateDefinition>,
    pub types: Vec<RecordDefinition>,
    pub aliases: Vec<TypeAlias>,
    pub values: Vec<ValueDefinition>,
    pub functions: Vec<FunctionDefinition>,
    pub operations: Vec<OperationDefinition>,
}

impl ModuleDefinition {
    pub fn record(&self, name: &str) -> Option<RecordDefinition> {
        if let Some(r) = self.types.iter().find(|r| r.name == name) {
            return Some(r.clone());
        }
        self.state.as_ref().filter(|s| s.name == name).map(|s| s.as_record())
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDefinition> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn operation(&self, name: &str) -> Option<&OperationDefinition> {
        self.operations.iter().find(|o| o.name == name)
    }

    pub fn alias(&self, name: &str) -> Option<&TypeAlias> {
        self.aliases.iter().find(|a| a.name == name)
    }

    pub fn state_field_names(&self) -> Vec<String> {
        self.state
            .as_ref()
            .map(|s| s.fields.iter().map(|f| f.name.clone()).collect())
            .unwrap_or_default()
    }
}

/// One step of an obligation's context.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextClause {
    ForAll(Vec<Bind>),
    /// `pre_op(args) =>`
    PreImplication {
        pre_name: String,
        args: Vec<Expr>,
    },
    /// `(cond) =>` or `not (cond) =>`
    BranchImplication {
        cond: Expr,
        negated: bool,
    },
    LetDef {
        name: String,
        ty: Type,
        value: Expr,
    },
    /// `let p = value in` for pattern lets met inside expressions.
    LetPattern {
        pattern: Pattern,
        value: Expr,
    },
    /// `let v$ = v in`; `name` already carries the `$` suffix.
    LetOldState {
        name: String,
        value: Expr,
    },
    ResultBinding {
        name: String,
        value: Expr,
    },
    InlineFunctions {
        definitions: Vec<InlineFunction>,
        entry: Expr,
    },
}

/// A function defined inside an obligation. `flat` bodies are rendered
/// with minimal parentheses rather than fully bracketed.
#[derive(Debug, Clone, PartialEq)]
pub struct InlineFunction {
    pub def: FunctionDefinition,
    pub flat: bool,
}

impl ContextClause {
    /// Names this clause binds for everything after it.
    pub fn bound_names(&self) -> Vec<String> {
        match self {
            ContextClause::ForAll(binds) => binds.iter().flat_map(|b| b.pattern.names()).collect(),
            ContextClause::LetDef { name, .. }
            | ContextClause::LetOldState { name, .. }
            | ContextClause::ResultBinding { name, .. } => vec![name.clone()],
            ContextClause::LetPattern { pattern, .. } => pattern.names(),
            ContextClause::InlineFunctions { definitions, .. } => {
                definitions.iter().map(|d| d.def.name.clone()).collect()
            }
            ContextClause::PreImplication { .. } | ContextClause::BranchImplication { .. } => Vec::new(),
        }
    }

    /// Wraps `rest` in this clause, giving the equivalent expression.
    pub fn wrap(&self, rest: Expr) -> Expr {
        let pos = rest.pos;
        match self {
            ContextClause::ForAll(binds) => {
                if binds.is_empty() {
                    rest
                } else {
                    Expr::new(
                        ExprKind::Forall {
                            binds: binds.clone(),
                            body: Box::new(rest),
                        },
                        pos,
                    )
                }
            }
            ContextClause::PreImplication { pre_name, args } => {
                Expr::binary(BinaryOp::Implies, Expr::call(pre_name, args.clone(), pos), rest, pos)
            }
            ContextClause::BranchImplication { cond, negated } => {
                let c = if *negated {
                    Expr::not(cond.clone())
                } else {
                    cond.clone()
                };
                Expr::binary(BinaryOp::Implies, c, rest, pos)
            }
            ContextClause::LetDef { name, ty, value } => {
                Expr::let_in(Pattern::ident(name), Some(ty.clone()), value.clone(), rest)
            }
            ContextClause::LetPattern { pattern, value } => Expr::let_in(pattern.clone(), None, value.clone(), rest),
            ContextClause::LetOldState { name, value } | ContextClause::ResultBinding { name, value } => {
                Expr::let_in(Pattern::ident(name), None, value.clone(), rest)
            }
            ContextClause::InlineFunctions { definitions, .. } => Expr::new(
                ExprKind::LetFunctions {
                    defs: definitions.iter().map(|d| d.def.clone()).collect(),
                    body: Box::new(rest),
                },
                pos,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ObligationKind {
    MapApply,
    SeqApply,
    NonZero,
    StateInvariant,
    PostCondition,
    LoopInvariantEstablish,
    LoopInvariantPreserve,
}

impl ObligationKind {
    pub const ALL: [ObligationKind; 7] = [
        ObligationKind::MapApply,
        ObligationKind::SeqApply,
        ObligationKind::NonZero,
        ObligationKind::StateInvariant,
        ObligationKind::PostCondition,
        ObligationKind::LoopInvariantEstablish,
        ObligationKind::LoopInvariantPreserve,
    ];

    /// Header text, as in `op: non-zero obligation at line 8:22`.
    pub fn text(self) -> &'static str {
        match self {
            ObligationKind::MapApply => "map apply",
            ObligationKind::SeqApply => "seq apply",
            ObligationKind::NonZero => "non-zero",
            ObligationKind::StateInvariant => "state invariant",
            ObligationKind::PostCondition => "post condition",
            ObligationKind::LoopInvariantEstablish | ObligationKind::LoopInvariantPreserve => "loop invariant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ObligationStatus {
    Unproved,
    Unchecked,
}

impl fmt::Display for ObligationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObligationStatus::Unproved => "Unproved",
            ObligationStatus::Unchecked => "Unchecked",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obligation {
    pub ordinal: u32,
    pub kind: ObligationKind,
    pub location: SourceLocation,
    /// Name of the function or operation the obligation arises in.
    pub operation_name: String,
    pub status: ObligationStatus,
    pub context: Vec<ContextClause>,
    pub predicate: Expr,
}

impl Obligation {
    /// The whole obligation as one closed boolean expression.
    pub fn to_expression(&self) -> Expr {
        self.context
            .iter()
            .rev()
            .fold(self.predicate.clone(), |acc, clause| clause.wrap(acc))
    }

    /// Binds of the outermost quantifier.
    pub fn outer_binds(&self) -> &[Bind] {
        match self.context.first() {
            Some(ContextClause::ForAll(b)) => b,
            _ => &[],
        }
    }

    /// The obligation with its outermost quantifier removed.
    pub fn body_expression(&self) -> Expr {
        let skip = usize::from(matches!(self.context.first(), Some(ContextClause::ForAll(_))));
        self.context[skip..]
            .iter()
            .rev()
            .fold(self.predicate.clone(), |acc, clause| clause.wrap(acc))
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        self.to_expression().free_variables()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Pos {
        Pos::new(1, 1)
    }

    #[test]
    fn locations_keep_their_coordinates() {
        let l = mk_location("m.vdmsl", 4, 10);
        assert_eq!((l.line, l.column), (4, 10));
        assert_eq!(l.to_string(), "m.vdmsl:4:10");
        let l = mk_location("m.vdmsl", 1, 1);
        assert_eq!(l.pos(), Pos::new(1, 1));
        let l = mk_location("m.vdmsl", 8, 22);
        assert_eq!(l.pos().to_string(), "8:22");
    }

    #[test]
    #[should_panic]
    fn zero_line_is_rejected() {
        mk_location("m.vdmsl", 0, 3);
    }

    #[test]
    fn free_variables_of_sum() {
        let e = Expr::binary(BinaryOp::Add, Expr::var("sv", p()), Expr::number("1", p()), p());
        assert_eq!(e.free_variables(), BTreeSet::from(["sv".to_string()]));
    }

    #[test]
    fn let_binder_removes_its_name() {
        let body = Expr::binary(BinaryOp::Add, Expr::var("a", p()), Expr::var("b", p()), p());
        let e = Expr::let_in(Pattern::ident("a"), None, Expr::number("1", p()), body);
        assert_eq!(e.free_variables(), BTreeSet::from(["b".to_string()]));
    }

    #[test]
    fn forall_binder_removes_its_name() {
        let body = Expr::binary(
            BinaryOp::InSet,
            Expr::var("key", p()),
            Expr::unary(UnaryOp::Dom, Expr::var("table", p()), p()),
            p(),
        );
        let e = Expr::new(
            ExprKind::Forall {
                binds: vec![Bind {
                    pattern: Pattern::ident("key"),
                    ty: Type::Nat,
                }],
                body: Box::new(body),
            },
            p(),
        );
        assert_eq!(e.free_variables(), BTreeSet::from(["table".to_string()]));
    }

    #[test]
    fn let_value_is_outside_the_binder() {
        // let a = a + 1 in a  -- the value's `a` is free
        let value = Expr::binary(BinaryOp::Add, Expr::var("a", p()), Expr::number("1", p()), p());
        let e = Expr::let_in(Pattern::ident("a"), None, value, Expr::var("a", p()));
        assert_eq!(e.free_variables(), BTreeSet::from(["a".to_string()]));
    }

    #[test]
    fn record_pattern_binds_fields() {
        let pat = Pattern::Record {
            name: "Sigma".into(),
            fields: vec![Pattern::ident("sv"), Pattern::ident("xv")],
        };
        assert_eq!(pat.names(), vec!["sv", "xv"]);
    }

    #[test]
    fn designator_root_is_the_innermost_name() {
        let d = Designator::Field {
            base: Box::new(Designator::Index {
                base: Box::new(Designator::Name {
                    name: "sv".into(),
                    pos: p(),
                }),
                index: Expr::number("1", p()),
            }),
            field: "size".into(),
            pos: p(),
        };
        assert_eq!(d.root(), "sv");
        assert_eq!(d.index_exprs().len(), 1);
    }

    #[test]
    fn old_names_rewrite_to_dollar() {
        let e = Expr::binary(
            BinaryOp::Gt,
            Expr::var("sv", p()),
            Expr::new(ExprKind::Old("sv".into()), p()),
            p(),
        );
        assert_eq!(e.old_names(), vec!["sv"]);
        let r = e.rewrite_old_names();
        assert_eq!(
            r.free_variables(),
            BTreeSet::from(["sv".to_string(), "sv$".to_string()])
        );
    }
}

//! Proof obligation generation for functions and explicit operations.
//!
//! Each operation body is walked statement by statement, carrying the set
//! of control-flow paths that reach the current point. A path is a list of
//! context steps. Most steps are context clauses; `Havoc` steps record
//! that some variables stopped having a known value (after a call, or in
//! an unannotated loop). When an obligation is emitted its context is
//! pruned of let-definitions nothing depends on, and it is marked
//! Unchecked if the predicate depends on a havoced variable.

use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexSet;
use rayon::prelude::*;

use crate::analysis::{callee_effects, check_invariant_coverage, infer_type, Analysis, Environment, Origin, WriteSet};
use crate::ast::*;
use crate::diagnostic::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PogOptions {
    /// Emit the recursive inline-function form for simple while loops.
    pub experimental_loop_functions: bool,
    /// Paths per definition before the rest are collapsed and marked Unchecked.
    pub max_paths: usize,
}

impl Default for PogOptions {
    fn default() -> Self {
        PogOptions {
            experimental_loop_functions: false,
            max_paths: 1024,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PogOutput {
    pub obligations: Vec<Obligation>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone)]
enum Step {
    Clause(ContextClause),
    Havoc(Vec<String>),
}

#[derive(Debug, Clone, Default)]
struct PathState {
    steps: Vec<Step>,
    /// Set when this path stands in for paths dropped by the path cap.
    collapsed: bool,
}

impl PathState {
    fn with(&self, c: ContextClause) -> PathState {
        let mut p = self.clone();
        p.steps.push(Step::Clause(c));
        p
    }

    fn push(&mut self, c: ContextClause) {
        self.steps.push(Step::Clause(c));
    }

    fn havoc(&mut self, names: impl IntoIterator<Item = String>) {
        let names: Vec<String> = names.into_iter().collect();
        if !names.is_empty() {
            self.steps.push(Step::Havoc(names));
        }
    }
}

/// A point inside an expression where a partial operator is applied.
#[derive(Debug, Clone)]
pub struct ObligationSite {
    pub kind: ObligationKind,
    pub pos: Pos,
    /// Clauses contributed by the enclosing expression (guards, lets).
    pub local: Vec<ContextClause>,
    pub predicate: Expr,
}

enum Definition<'a> {
    Function(&'a FunctionDefinition),
    Operation(&'a OperationDefinition),
}

impl Definition<'_> {
    fn pos(&self) -> Pos {
        match self {
            Definition::Function(f) => f.pos,
            Definition::Operation(o) => o.pos,
        }
    }
}

/// Generates every obligation of an analysed module, numbered from 1 in
/// definition order.
pub fn generate(a: &Analysis, opts: &PogOptions) -> PogOutput {
    let mut defs: Vec<Definition> = a
        .module
        .functions
        .iter()
        .map(Definition::Function)
        .chain(a.module.operations.iter().map(Definition::Operation))
        .collect();
    defs.sort_by_key(|d| d.pos());

    let parts: Vec<(Vec<Obligation>, Vec<Diagnostic>)> = defs
        .par_iter()
        .map(|d| {
            let mut g = Generator::new(a, opts, d);
            match d {
                Definition::Function(f) => g.function(f),
                Definition::Operation(o) => g.operation(o),
            }
            (g.out, g.diags)
        })
        .collect();

    let mut out = PogOutput::default();
    for (obs, diags) in parts {
        out.obligations.extend(obs);
        out.diagnostics.extend(diags);
    }
    for (i, o) in out.obligations.iter_mut().enumerate() {
        o.ordinal = i as u32 + 1;
    }
    out
}

/// The outer quantifier and precondition clauses of a definition.
pub fn initial_quantifier(
    params: &[Param],
    pre: Option<&Expr>,
    name: &str,
    state: Option<&StateDefinition>,
    pos: Pos,
) -> Vec<ContextClause> {
    let mut binds: Vec<Bind> = params
        .iter()
        .map(|p| Bind {
            pattern: Pattern::ident(&p.name),
            ty: p.ty.clone(),
        })
        .collect();
    if let Some(st) = state {
        binds.push(Bind {
            pattern: st.record_pattern(),
            ty: Type::Named(st.name.clone()),
        });
    }
    let mut out = vec![ContextClause::ForAll(binds)];
    if pre.is_some() {
        let mut args: Vec<Expr> = params.iter().map(|p| Expr::var(&p.name, pos)).collect();
        if let Some(st) = state {
            args.push(st.record_expr(false, pos));
        }
        out.push(ContextClause::PreImplication {
            pre_name: format!("pre_{name}"),
            args,
        });
    }
    out
}

/// The new value of the root variable after assigning `rhs` to `target`.
/// Index steps become `base ++ {i |-> inner}` and field steps become
/// `mu(base, f |-> inner)`.
pub fn translate_assignment(target: &Designator, rhs: &Expr) -> (String, Expr) {
    match target {
        Designator::Name { name, .. } => (name.clone(), rhs.clone()),
        Designator::Index { base, index } => {
            let b = base.to_expr();
            let pos = b.pos;
            let inner = Expr::new(
                ExprKind::Override {
                    base: Box::new(b),
                    with: Box::new(Expr::new(
                        ExprKind::MapEnum(vec![(index.clone(), rhs.clone())]),
                        index.pos,
                    )),
                },
                pos,
            );
            translate_assignment(base, &inner)
        }
        Designator::Field { base, field, pos } => {
            let inner = Expr::new(
                ExprKind::Mu {
                    record: Box::new(base.to_expr()),
                    updates: vec![(field.clone(), rhs.clone())],
                },
                *pos,
            );
            translate_assignment(base, &inner)
        }
    }
}

fn contains_any(t: &Type) -> bool {
    match t {
        Type::Any => true,
        Type::Seq(e) | Type::Set(e) => contains_any(e),
        Type::Map(d, r) => contains_any(d) || contains_any(r),
        Type::Product(ts) => ts.iter().any(contains_any),
        _ => false,
    }
}

fn zero(pos: Pos) -> Expr {
    Expr::number("0", pos)
}

fn and(l: Expr, r: Expr) -> Expr {
    let pos = l.pos;
    Expr::binary(BinaryOp::And, l, r, pos)
}

fn bind(name: &str, ty: Type) -> Bind {
    Bind {
        pattern: Pattern::ident(name),
        ty,
    }
}

/// Prunes let-definitions the predicate does not depend on. Returns the
/// remaining clauses and whether the predicate depends on a havoced value.
fn finalize(steps: &[Step], predicate: &Expr) -> (Vec<ContextClause>, bool) {
    let mut needed: BTreeSet<String> = predicate.free_variables();
    let mut ambiguous = false;
    let mut kept: Vec<ContextClause> = Vec::new();
    for (i, step) in steps.iter().enumerate().rev() {
        let c = match step {
            Step::Havoc(names) => {
                if names.iter().any(|n| needed.contains(n)) {
                    ambiguous = true;
                }
                continue;
            }
            Step::Clause(c) => c,
        };
        match c {
            ContextClause::LetDef { name, value, .. }
            | ContextClause::LetOldState { name, value }
            | ContextClause::ResultBinding { name, value } => {
                if needed.remove(name) {
                    needed.extend(value.free_variables());
                    kept.push(c.clone());
                }
            }
            ContextClause::LetPattern { pattern, value } => {
                let names = pattern.names();
                if names.iter().any(|n| needed.contains(n)) {
                    for n in &names {
                        needed.remove(n);
                    }
                    needed.extend(value.free_variables());
                    kept.push(c.clone());
                }
            }
            ContextClause::ForAll(binds) => {
                if i == 0 {
                    for b in binds {
                        for n in b.pattern.names() {
                            needed.remove(&n);
                        }
                    }
                    kept.push(c.clone());
                } else {
                    let live: Vec<Bind> = binds
                        .iter()
                        .filter(|b| b.pattern.names().iter().any(|n| needed.contains(n)))
                        .cloned()
                        .collect();
                    for b in &live {
                        for n in b.pattern.names() {
                            needed.remove(&n);
                        }
                    }
                    if !live.is_empty() {
                        kept.push(ContextClause::ForAll(live));
                    }
                }
            }
            ContextClause::BranchImplication { cond, .. } => {
                needed.extend(cond.free_variables());
                kept.push(c.clone());
            }
            ContextClause::PreImplication { args, .. } => {
                for a in args {
                    needed.extend(a.free_variables());
                }
                kept.push(c.clone());
            }
            ContextClause::InlineFunctions { definitions, .. } => {
                let names: Vec<String> = definitions.iter().map(|d| d.def.name.clone()).collect();
                if names.iter().any(|n| needed.contains(n)) {
                    let probe = Expr::new(
                        ExprKind::LetFunctions {
                            defs: definitions.iter().map(|d| d.def.clone()).collect(),
                            body: Box::new(Expr::new(ExprKind::Bool(true), Pos::default())),
                        },
                        Pos::default(),
                    );
                    for n in &names {
                        needed.remove(n);
                    }
                    needed.extend(probe.free_variables());
                    kept.push(c.clone());
                }
            }
        }
    }
    kept.reverse();
    (kept, ambiguous)
}

/// Unchecked iff the predicate depends on a havoced variable or the site
/// is otherwise tainted.
fn propagate_ambiguity(steps: &[Step], predicate: &Expr, tainted: bool) -> (Vec<ContextClause>, ObligationStatus) {
    let (context, ambiguous) = finalize(steps, predicate);
    let status = if ambiguous || tainted {
        ObligationStatus::Unchecked
    } else {
        ObligationStatus::Unproved
    };
    (context, status)
}

struct Generator<'a> {
    a: &'a Analysis,
    opts: &'a PogOptions,
    file: Arc<str>,
    name: String,
    env: Environment,
    out: Vec<Obligation>,
    diags: Vec<Diagnostic>,
    /// Nesting depth of regions whose obligations are all Unchecked.
    forced: usize,
    hiding: Option<Pos>,
    capped: bool,
    op: Option<&'a OperationDefinition>,
    ws: Option<&'a WriteSet>,
}

impl<'a> Generator<'a> {
    fn new(a: &'a Analysis, opts: &'a PogOptions, d: &Definition<'a>) -> Self {
        let name = match d {
            Definition::Function(f) => f.name.clone(),
            Definition::Operation(o) => o.name.clone(),
        };
        Generator {
            a,
            opts,
            file: a.file.clone(),
            hiding: a.first_hiding(&name),
            ws: a.write_sets.get(&name),
            name,
            env: Environment::new(),
            out: Vec::new(),
            diags: Vec::new(),
            forced: 0,
            capped: false,
            op: None,
        }
    }

    fn emit(&mut self, path: &PathState, local: &[ContextClause], kind: ObligationKind, pos: Pos, predicate: Expr) {
        let mut steps = path.steps.clone();
        steps.extend(local.iter().cloned().map(Step::Clause));
        let hidden = self
            .hiding
            .is_some_and(|h| pos >= h || kind == ObligationKind::PostCondition);
        let tainted = hidden || path.collapsed || self.forced > 0;
        let (context, status) = propagate_ambiguity(&steps, &predicate, tainted);
        self.out.push(Obligation {
            ordinal: 0,
            kind,
            location: SourceLocation {
                file: self.file.clone(),
                line: pos.line.max(1),
                column: pos.column.max(1),
            },
            operation_name: self.name.clone(),
            status,
            context,
            predicate,
        });
    }

    fn emit_sites(&mut self, paths: &[PathState], sites: &[ObligationSite]) {
        for s in sites {
            for p in paths {
                self.emit(p, &s.local, s.kind, s.pos, s.predicate.clone());
            }
        }
    }

    fn lookup_type(&self, name: &str) -> Type {
        self.env.lookup(name).map(|b| b.ty.clone()).unwrap_or(Type::Any)
    }

    fn function(&mut self, f: &FunctionDefinition) {
        self.env.push();
        for p in &f.params {
            self.env.declare(&p.name, p.ty.clone(), Origin::Parameter);
        }
        let mut path = PathState::default();
        for c in initial_quantifier(&f.params, f.pre.as_ref(), &f.name, None, f.pos) {
            path.push(c);
        }
        let sites = self.expression_sites(&f.body);
        self.emit_sites(&[path], &sites);
        self.env.pop();
    }

    fn operation(&mut self, op: &'a OperationDefinition) {
        self.op = Some(op);
        let state = self.a.module.state.as_ref();
        if let Some(st) = state {
            for f in &st.fields {
                self.env.declare(&f.name, f.ty.clone(), Origin::StateField);
            }
        }
        self.env.push();
        for p in &op.params {
            self.env.declare(&p.name, p.ty.clone(), Origin::Parameter);
        }
        let mut path = PathState::default();
        for c in initial_quantifier(&op.params, op.pre.as_ref(), &op.name, state, op.pos) {
            path.push(c);
        }
        if let Some(post) = &op.post {
            for c in capture_old_state(post) {
                path.push(c);
            }
        }
        let exits = self.stmt(&op.body, vec![path]);
        if let Some(post) = &op.post {
            let result = op.result_name.clone().unwrap_or_else(|| RESULT.to_string());
            let pred = post.rewrite_old_names();
            let unbound_result = op.result_type.is_some() && pred.free_variables().contains(&result);
            for mut p in exits {
                if unbound_result {
                    // No return on this path: the result is unconstrained.
                    p.push(ContextClause::ForAll(vec![bind(
                        &result,
                        op.result_type.clone().unwrap(),
                    )]));
                    p.havoc([result.clone()]);
                }
                self.emit(&p, &[], ObligationKind::PostCondition, post.pos, pred.clone());
            }
        }
        self.env.pop();
    }

    fn cap(&mut self, mut paths: Vec<PathState>, pos: Pos) -> Vec<PathState> {
        if paths.len() <= self.opts.max_paths && !(self.capped && paths.len() > 1) {
            return paths;
        }
        if !self.capped {
            self.capped = true;
            self.diags.push(Diagnostic::warning(
                &self.file,
                pos,
                format!(
                    "'{}' has more than {} paths; later obligations are emitted once and marked Unchecked",
                    self.name, self.opts.max_paths
                ),
            ));
        }
        paths.truncate(1);
        paths[0].collapsed = true;
        paths
    }

    fn stmt(&mut self, s: &Stmt, mut paths: Vec<PathState>) -> Vec<PathState> {
        if paths.is_empty() {
            return paths;
        }
        match &s.kind {
            StmtKind::Block { dcls, body } => {
                self.env.push();
                for d in dcls {
                    match &d.init {
                        Some(init) => {
                            let sites = self.expression_sites(init);
                            self.emit_sites(&paths, &sites);
                            for p in &mut paths {
                                p.push(ContextClause::LetDef {
                                    name: d.name.clone(),
                                    ty: d.ty.clone(),
                                    value: init.clone(),
                                });
                            }
                        }
                        None => {
                            for p in &mut paths {
                                p.push(ContextClause::ForAll(vec![bind(&d.name, d.ty.clone())]));
                                p.havoc([d.name.clone()]);
                            }
                        }
                    }
                    self.env.declare(&d.name, d.ty.clone(), Origin::Dcl);
                }
                for c in body {
                    paths = self.stmt(c, paths);
                }
                self.env.pop();
                paths
            }
            StmtKind::Assign { target, rhs } => {
                let mut sites = self.designator_sites(target, true);
                sites.extend(self.expression_sites(rhs));
                self.emit_sites(&paths, &sites);
                let (root, value) = translate_assignment(target, rhs);
                let ty = self.lookup_type(&root);
                for p in &mut paths {
                    p.push(ContextClause::LetDef {
                        name: root.clone(),
                        ty: ty.clone(),
                        value: value.clone(),
                    });
                }
                paths
            }
            StmtKind::If { cond, then, els } => {
                let sites = self.expression_sites(cond);
                self.emit_sites(&paths, &sites);
                let branch = |negated| ContextClause::BranchImplication {
                    cond: (*cond).clone(),
                    negated,
                };
                let t_in: Vec<PathState> = paths.iter().map(|p| p.with(branch(false))).collect();
                let e_in: Vec<PathState> = paths.iter().map(|p| p.with(branch(true))).collect();
                let mut out = self.stmt(then, t_in);
                match els {
                    Some(e) => out.extend(self.stmt(e, e_in)),
                    None => out.extend(e_in),
                }
                self.cap(out, s.pos)
            }
            StmtKind::Return(value) => {
                if let Some(v) = value {
                    let sites = self.expression_sites(v);
                    self.emit_sites(&paths, &sites);
                }
                let op = self.op.expect("return outside an operation");
                if let Some(post) = &op.post {
                    let result = op.result_name.clone().unwrap_or_else(|| RESULT.to_string());
                    let pred = post.rewrite_old_names();
                    for mut p in paths {
                        if let Some(v) = value {
                            p.push(ContextClause::ResultBinding {
                                name: result.clone(),
                                value: v.clone(),
                            });
                        }
                        self.emit(&p, &[], ObligationKind::PostCondition, post.pos, pred.clone());
                    }
                }
                Vec::new()
            }
            StmtKind::Call {
                callee,
                args,
                assign_to,
            } => {
                let mut sites = Vec::new();
                for a in args {
                    sites.extend(self.expression_sites(a));
                }
                if let Some(d) = assign_to {
                    sites.extend(self.designator_sites(d, true));
                }
                self.emit_sites(&paths, &sites);
                let fields = self.a.module.state_field_names();
                let mut written: IndexSet<String> = callee_effects(&self.a.module, callee)
                    .map(|e| e.written(&fields))
                    .unwrap_or_else(|_| fields.iter().cloned().collect());
                if let Some(d) = assign_to {
                    written.insert(d.root().to_string());
                }
                for p in &mut paths {
                    p.havoc(written.iter().cloned());
                }
                paths
            }
            StmtKind::Atomic(pairs) => self.translate_atomic(s.pos, pairs, paths),
            StmtKind::While { .. } | StmtKind::ForIndex { .. } | StmtKind::ForSeq { .. } => {
                self.loop_obligations(s, paths)
            }
        }
    }

    /// Type of the value a designator denotes.
    fn designated_type(&self, d: &Designator) -> Type {
        let syms = &self.a.symbols;
        match d {
            Designator::Name { name, .. } => self.lookup_type(name),
            Designator::Index { base, .. } => match syms.normalize(&self.designated_type(base)) {
                Type::Map(_, r) => *r,
                Type::Seq(e) => *e,
                _ => Type::Any,
            },
            Designator::Field { base, field, .. } => match syms.normalize(&self.designated_type(base)) {
                Type::Named(r) => syms
                    .record(&r)
                    .and_then(|def| def.field(field))
                    .map(|f| f.ty.clone())
                    .unwrap_or(Type::Any),
                _ => Type::Any,
            },
        }
    }

    /// Sites for the index expressions of a designator, and for the reads
    /// the update makes: every sequence index, and map keys below the
    /// outermost step (the outermost map step may extend the map).
    fn designator_sites(&mut self, d: &Designator, outermost: bool) -> Vec<ObligationSite> {
        match d {
            Designator::Name { .. } => Vec::new(),
            Designator::Field { base, .. } => self.designator_sites(base, false),
            Designator::Index { base, index } => {
                let mut out = self.designator_sites(base, false);
                out.extend(self.expression_sites(index));
                let base_expr = base.to_expr();
                match self.a.symbols.normalize(&self.designated_type(base)) {
                    Type::Seq(_) => out.push(ObligationSite {
                        kind: ObligationKind::SeqApply,
                        pos: d.pos(),
                        local: Vec::new(),
                        predicate: member(index.clone(), UnaryOp::Inds, base_expr),
                    }),
                    Type::Map(..) if !outermost => out.push(ObligationSite {
                        kind: ObligationKind::MapApply,
                        pos: d.pos(),
                        local: Vec::new(),
                        predicate: member(index.clone(), UnaryOp::Dom, base_expr),
                    }),
                    _ => {}
                }
                out
            }
        }
    }

    /// Sites for partial operators in `e`, left to right.
    pub fn expression_sites(&mut self, e: &Expr) -> Vec<ObligationSite> {
        let mut env = self.env.clone();
        let mut local = Vec::new();
        let mut out = Vec::new();
        collect_sites(self.a, e, &mut env, &mut local, &mut out);
        out
    }

    fn translate_atomic(
        &mut self,
        pos: Pos,
        pairs: &[(Designator, Expr)],
        mut paths: Vec<PathState>,
    ) -> Vec<PathState> {
        let mut sites = Vec::new();
        for (d, rhs) in pairs {
            sites.extend(self.designator_sites(d, true));
            sites.extend(self.expression_sites(rhs));
        }
        self.emit_sites(&paths, &sites);

        let mut clauses = Vec::new();
        let mut temps = Vec::new();
        for (k, (d, rhs)) in pairs.iter().enumerate() {
            let name = format!("$atomic{}", k + 1);
            let ty = match infer_type(rhs, &self.env, &self.a.symbols) {
                Ok(t) if !contains_any(&t) => t,
                _ => self.designated_type(d),
            };
            clauses.push(ContextClause::LetDef {
                name: name.clone(),
                ty,
                value: rhs.clone(),
            });
            temps.push(Expr::var(&name, rhs.pos));
        }
        for ((d, _), t) in pairs.iter().zip(temps) {
            let (root, value) = translate_assignment(d, &t);
            clauses.push(ContextClause::LetDef {
                ty: self.lookup_type(&root),
                name: root,
                value,
            });
        }
        for p in &mut paths {
            for c in &clauses {
                p.push(c.clone());
            }
        }
        if let Some(st) = &self.a.module.state {
            if let Some(inv) = &st.invariant {
                let pred = Expr::let_in(inv.pattern.clone(), None, st.record_expr(true, pos), inv.body.clone());
                for p in &paths {
                    self.emit(p, &[], ObligationKind::StateInvariant, pos, pred.clone());
                }
            }
        }
        paths
    }

    fn loop_obligations(&mut self, s: &Stmt, paths: Vec<PathState>) -> Vec<PathState> {
        let written: Vec<String> = self.ws.map(|w| w.of(s.id).into_iter().collect()).unwrap_or_default();
        let typed: Vec<Bind> = written.iter().map(|n| bind(n, self.lookup_type(n))).collect();
        let inv = s.loop_invariant().cloned();

        let uncovered = match (&inv, self.ws) {
            (Some(_), Some(ws)) => {
                let d = check_invariant_coverage(s, ws, &self.file);
                let bad = !d.is_empty();
                self.diags.extend(d);
                bad
            }
            _ => false,
        };
        if uncovered {
            self.forced += 1;
        }
        let out = match inv {
            Some(inv) => self.annotated_loop(s, paths, &written, &typed, &inv),
            None => self.unannotated_loop(s, paths, &written),
        };
        if uncovered {
            self.forced -= 1;
        }
        out
    }

    fn annotated_loop(
        &mut self,
        s: &Stmt,
        paths: Vec<PathState>,
        written: &[String],
        typed: &[Bind],
        inv: &Expr,
    ) -> Vec<PathState> {
        let pos = s.pos;
        let requantify = |p: &PathState, extra: &[Bind]| {
            let mut binds = typed.to_vec();
            binds.extend_from_slice(extra);
            let mut q = p.clone();
            if !binds.is_empty() {
                q.push(ContextClause::ForAll(binds));
            }
            q
        };
        let holds = |e: &Expr| ContextClause::BranchImplication {
            cond: e.clone(),
            negated: false,
        };
        match &s.kind {
            StmtKind::While { cond, body, .. } => {
                let inline =
                    self.opts.experimental_loop_functions && !written.is_empty() && straight_line(body).is_some();
                if inline {
                    for p in &paths {
                        let (p2, pred) = self.inline_loop(p, s, cond, body, inv, written);
                        self.emit(&p2, &[], ObligationKind::LoopInvariantEstablish, pos, pred);
                    }
                } else {
                    for p in &paths {
                        self.emit(p, &[], ObligationKind::LoopInvariantEstablish, pos, inv.clone());
                    }
                }
                let head: Vec<PathState> = paths.iter().map(|p| requantify(p, &[]).with(holds(inv))).collect();
                let sites = self.expression_sites(cond);
                self.emit_sites(&head, &sites);
                let body_in: Vec<PathState> = paths
                    .iter()
                    .map(|p| requantify(p, &[]).with(holds(cond)).with(holds(inv)))
                    .collect();
                let exits = self.stmt(body, body_in);
                if !inline {
                    for e in &exits {
                        self.emit(e, &[], ObligationKind::LoopInvariantPreserve, pos, inv.clone());
                    }
                }
                paths
                    .iter()
                    .map(|p| {
                        requantify(p, &[])
                            .with(holds(inv))
                            .with(ContextClause::BranchImplication {
                                cond: (*cond).clone(),
                                negated: true,
                            })
                    })
                    .collect()
            }
            StmtKind::ForIndex {
                var,
                from,
                to,
                by,
                body,
                ..
            } => {
                let mut sites = self.expression_sites(from);
                sites.extend(self.expression_sites(to));
                if let Some(b) = by {
                    sites.extend(self.expression_sites(b));
                }
                self.emit_sites(&paths, &sites);
                let vt = self.index_type(from, by.as_ref());
                let mentions_var = inv.free_variables().contains(var);
                for p in &paths {
                    let mut q = p.clone();
                    if mentions_var {
                        q.push(ContextClause::LetDef {
                            name: var.clone(),
                            ty: vt.clone(),
                            value: (*from).clone(),
                        });
                    }
                    self.emit(&q, &[], ObligationKind::LoopInvariantEstablish, pos, inv.clone());
                }
                let range = self.index_range(var, from, to, by.as_ref(), written);
                self.env.push();
                self.env.declare(var, vt.clone(), Origin::LoopVariable);
                let body_in: Vec<PathState> = paths
                    .iter()
                    .map(|p| {
                        let mut q = requantify(p, &[bind(var, vt.clone())]);
                        if let Some(r) = &range {
                            q.push(holds(r));
                        }
                        q.with(holds(inv))
                    })
                    .collect();
                let exits = self.stmt(body, body_in);
                for e in &exits {
                    self.emit(e, &[], ObligationKind::LoopInvariantPreserve, pos, inv.clone());
                }
                self.env.pop();
                paths
                    .iter()
                    .map(|p| {
                        let q = requantify(p, &[]);
                        if mentions_var {
                            q
                        } else {
                            q.with(holds(inv))
                        }
                    })
                    .collect()
            }
            StmtKind::ForSeq { var, seq, body, .. } => {
                let sites = self.expression_sites(seq);
                self.emit_sites(&paths, &sites);
                let el = match self
                    .a
                    .symbols
                    .normalize(&infer_type(seq, &self.env, &self.a.symbols).unwrap_or(Type::Any))
                {
                    Type::Seq(e) => *e,
                    _ => Type::Any,
                };
                let mentions_var = inv.free_variables().contains(var);
                for p in &paths {
                    let mut q = p.clone();
                    if mentions_var {
                        q.push(holds(&Expr::binary(
                            BinaryOp::Ne,
                            (*seq).clone(),
                            Expr::new(ExprKind::SeqEnum(Vec::new()), seq.pos),
                            seq.pos,
                        )));
                        q.push(ContextClause::LetDef {
                            name: var.clone(),
                            ty: el.clone(),
                            value: Expr::unary(UnaryOp::Hd, (*seq).clone(), seq.pos),
                        });
                    }
                    self.emit(&q, &[], ObligationKind::LoopInvariantEstablish, pos, inv.clone());
                }
                let stable = !seq.free_variables().iter().any(|v| written.contains(v));
                self.env.push();
                self.env.declare(var, el.clone(), Origin::LoopVariable);
                let body_in: Vec<PathState> = paths
                    .iter()
                    .map(|p| {
                        let mut q = requantify(p, &[bind(var, el.clone())]);
                        if stable {
                            q.push(holds(&member(Expr::var(var, pos), UnaryOp::Elems, (*seq).clone())));
                        }
                        q.with(holds(inv))
                    })
                    .collect();
                let exits = self.stmt(body, body_in);
                for e in &exits {
                    self.emit(e, &[], ObligationKind::LoopInvariantPreserve, pos, inv.clone());
                }
                self.env.pop();
                paths
                    .iter()
                    .map(|p| {
                        let q = requantify(p, &[]);
                        if mentions_var {
                            q
                        } else {
                            q.with(holds(inv))
                        }
                    })
                    .collect()
            }
            _ => unreachable!("not a loop"),
        }
    }

    /// Without an invariant nothing is known about the written variables,
    /// in the body or after the loop.
    fn unannotated_loop(&mut self, s: &Stmt, paths: Vec<PathState>, written: &[String]) -> Vec<PathState> {
        let havoced = |p: &PathState| {
            let mut q = p.clone();
            q.havoc(written.iter().cloned());
            q
        };
        match &s.kind {
            StmtKind::While { cond, body, .. } => {
                let sites = self.expression_sites(cond);
                self.emit_sites(&paths, &sites);
                self.forced += 1;
                let body_in: Vec<PathState> = paths.iter().map(havoced).collect();
                self.stmt(body, body_in);
                self.forced -= 1;
            }
            StmtKind::ForIndex {
                var,
                from,
                to,
                by,
                body,
                ..
            } => {
                let mut sites = self.expression_sites(from);
                sites.extend(self.expression_sites(to));
                if let Some(b) = by {
                    sites.extend(self.expression_sites(b));
                }
                self.emit_sites(&paths, &sites);
                let vt = self.index_type(from, by.as_ref());
                self.forced += 1;
                self.env.push();
                self.env.declare(var, vt.clone(), Origin::LoopVariable);
                let body_in: Vec<PathState> = paths
                    .iter()
                    .map(|p| havoced(p).with(ContextClause::ForAll(vec![bind(var, vt.clone())])))
                    .collect();
                self.stmt(body, body_in);
                self.env.pop();
                self.forced -= 1;
            }
            StmtKind::ForSeq { var, seq, body, .. } => {
                let sites = self.expression_sites(seq);
                self.emit_sites(&paths, &sites);
                let el = match self
                    .a
                    .symbols
                    .normalize(&infer_type(seq, &self.env, &self.a.symbols).unwrap_or(Type::Any))
                {
                    Type::Seq(e) => *e,
                    _ => Type::Any,
                };
                self.forced += 1;
                self.env.push();
                self.env.declare(var, el.clone(), Origin::LoopVariable);
                let body_in: Vec<PathState> = paths
                    .iter()
                    .map(|p| havoced(p).with(ContextClause::ForAll(vec![bind(var, el.clone())])))
                    .collect();
                self.stmt(body, body_in);
                self.env.pop();
                self.forced -= 1;
            }
            _ => unreachable!("not a loop"),
        }
        paths.iter().map(havoced).collect()
    }

    fn index_type(&self, from: &Expr, by: Option<&Expr>) -> Type {
        match infer_type(from, &self.env, &self.a.symbols) {
            Ok(t @ (Type::Nat | Type::Nat1)) if by.is_none() => t,
            _ => Type::Int,
        }
    }

    /// `from <= v and v <= to`, when the bounds do not depend on variables
    /// the loop changes and the step is known to be positive.
    fn index_range(&self, var: &str, from: &Expr, to: &Expr, by: Option<&Expr>, written: &[String]) -> Option<Expr> {
        let positive = match by {
            None => true,
            Some(b) => matches!(&b.kind, ExprKind::Number(n) if n != "0"),
        };
        let moves = from
            .free_variables()
            .union(&to.free_variables())
            .any(|v| written.contains(v));
        if !positive || moves {
            return None;
        }
        let v = Expr::var(var, from.pos);
        Some(and(
            Expr::binary(BinaryOp::Le, from.clone(), v.clone(), from.pos),
            Expr::binary(BinaryOp::Le, v, to.clone(), to.pos),
        ))
    }

    /// The experimental recursive form: `body`, `invariant` and `loop`
    /// functions defined after the quantifier, with the predicate applying
    /// `loop` to the current values.
    fn inline_loop(
        &self,
        p: &PathState,
        s: &Stmt,
        cond: &Expr,
        body: &Stmt,
        inv: &Expr,
        written: &[String],
    ) -> (PathState, Expr) {
        let pos = s.pos;
        let assigns = straight_line(body).unwrap_or_default();
        let local = |n: &String| self.env.lookup(n).is_some() && !written.contains(n);

        let mut reads: Vec<String> = Vec::new();
        for (d, rhs) in &assigns {
            let mut exprs: Vec<Expr> = d.index_exprs().into_iter().cloned().collect();
            exprs.push(rhs.clone());
            for e in exprs {
                for v in e.free_variables_ordered() {
                    if local(&v) && !reads.contains(&v) {
                        reads.push(v);
                    }
                }
            }
        }
        let mut inv_params: Vec<String> = written.to_vec();
        for v in inv.free_variables_ordered() {
            if local(&v) && !inv_params.contains(&v) {
                inv_params.push(v);
            }
        }
        let mut loop_params = inv_params.clone();
        for v in cond.free_variables_ordered().into_iter().chain(reads.iter().cloned()) {
            if self.env.lookup(&v).is_some() && !loop_params.contains(&v) {
                loop_params.push(v);
            }
        }
        let mut body_params: Vec<String> = written.to_vec();
        body_params.extend(reads.iter().cloned());

        let params = |names: &[String]| -> Vec<Param> {
            names
                .iter()
                .map(|n| Param {
                    name: n.clone(),
                    ty: self.lookup_type(n),
                })
                .collect()
        };
        let vars = |names: &[String]| -> Vec<Expr> { names.iter().map(|n| Expr::var(n, pos)).collect() };
        let written_types: Vec<Type> = written.iter().map(|n| self.lookup_type(n)).collect();
        let (tuple, tuple_type, tuple_pattern) = if written.len() == 1 {
            (
                Expr::var(&written[0], pos),
                written_types[0].clone(),
                Pattern::ident(&written[0]),
            )
        } else {
            (
                Expr::new(ExprKind::MkTuple(vars(written)), pos),
                Type::Product(written_types),
                Pattern::Tuple(written.iter().map(|n| Pattern::ident(n)).collect()),
            )
        };

        let mut body_expr = tuple;
        for (d, rhs) in assigns.iter().rev() {
            let (root, value) = translate_assignment(d, rhs);
            body_expr = Expr::let_in(Pattern::ident(&root), Some(self.lookup_type(&root)), value, body_expr);
        }
        let def = |name: &str, ps: &[String], result: Type, body: Expr| FunctionDefinition {
            name: name.to_string(),
            params: params(ps),
            result_type: result,
            result_name: None,
            total: true,
            body,
            pre: None,
            post: None,
            pos,
        };
        let inv_call = Expr::call("invariant", vars(&inv_params), pos);
        let loop_call = Expr::call("loop", vars(&loop_params), pos);
        let loop_body = Expr::binary(
            BinaryOp::Implies,
            cond.clone(),
            and(
                inv_call.clone(),
                Expr::let_in(
                    tuple_pattern,
                    None,
                    Expr::call("body", vars(&body_params), pos),
                    and(inv_call, loop_call.clone()),
                ),
            ),
            pos,
        );
        let definitions = vec![
            InlineFunction {
                def: def("body", &body_params, tuple_type, body_expr),
                flat: false,
            },
            InlineFunction {
                def: def("invariant", &inv_params, Type::Bool, inv.clone()),
                flat: false,
            },
            InlineFunction {
                def: def("loop", &loop_params, Type::Bool, loop_body),
                flat: true,
            },
        ];
        let clause = ContextClause::InlineFunctions {
            definitions,
            entry: loop_call.clone(),
        };
        // The functions go straight after the quantifier and precondition.
        let at = p
            .steps
            .iter()
            .take_while(|s| {
                matches!(
                    s,
                    Step::Clause(ContextClause::ForAll(_)) | Step::Clause(ContextClause::PreImplication { .. })
                )
            })
            .count();
        let mut q = p.clone();
        q.steps.insert(at, Step::Clause(clause));
        (q, loop_call)
    }
}

/// The assignments of a loop body made only of assignments.
fn straight_line(s: &Stmt) -> Option<Vec<(Designator, Expr)>> {
    match &s.kind {
        StmtKind::Assign { target, rhs } => Some(vec![(target.clone(), rhs.clone())]),
        StmtKind::Block { dcls, body } if dcls.is_empty() && !body.is_empty() => {
            let mut out = Vec::new();
            for c in body {
                out.extend(straight_line(c)?);
            }
            Some(out)
        }
        _ => None,
    }
}

/// `e in set op(coll)`
fn member(e: Expr, op: UnaryOp, coll: Expr) -> Expr {
    let pos = e.pos;
    let cpos = coll.pos;
    Expr::binary(BinaryOp::InSet, e, Expr::unary(op, coll, cpos), pos)
}

/// `let v$ = v` for every `v~` in the postcondition.
pub fn capture_old_state(post: &Expr) -> Vec<ContextClause> {
    post.old_names()
        .into_iter()
        .map(|v| ContextClause::LetOldState {
            name: old_state_name(&v),
            value: Expr::var(&v, post.pos),
        })
        .collect()
}

/// Reserved name of an unnamed operation result.
pub const RESULT: &str = "RESULT";

fn collect_sites(
    a: &Analysis,
    e: &Expr,
    env: &mut Environment,
    local: &mut Vec<ContextClause>,
    out: &mut Vec<ObligationSite>,
) {
    let site = |kind, predicate, local: &Vec<ContextClause>| ObligationSite {
        kind,
        pos: e.pos,
        local: local.clone(),
        predicate,
    };
    match &e.kind {
        ExprKind::Binary { op, lhs, rhs } => {
            collect_sites(a, lhs, env, local, out);
            match op {
                BinaryOp::And | BinaryOp::Implies | BinaryOp::Or => {
                    local.push(ContextClause::BranchImplication {
                        cond: (**lhs).clone(),
                        negated: *op == BinaryOp::Or,
                    });
                    collect_sites(a, rhs, env, local, out);
                    local.pop();
                }
                _ => {
                    collect_sites(a, rhs, env, local, out);
                    if op.is_division() {
                        let pred = Expr::binary(BinaryOp::Ne, (**rhs).clone(), zero(rhs.pos), rhs.pos);
                        out.push(site(ObligationKind::NonZero, pred, local));
                    }
                }
            }
        }
        ExprKind::Apply { root, args } => {
            let function = matches!(&root.kind, ExprKind::Var(n) if env.lookup(n).is_none()
                && a.symbols.value(n).is_none());
            if !function {
                collect_sites(a, root, env, local, out);
            }
            for x in args {
                collect_sites(a, x, env, local, out);
            }
            if function || args.len() != 1 {
                return;
            }
            let rt = infer_type(root, env, &a.symbols).unwrap_or(Type::Any);
            let (kind, op) = match a.symbols.normalize(&rt) {
                Type::Map(..) => (ObligationKind::MapApply, UnaryOp::Dom),
                Type::Seq(_) => (ObligationKind::SeqApply, UnaryOp::Inds),
                _ => return,
            };
            out.push(site(kind, member(args[0].clone(), op, (**root).clone()), local));
        }
        ExprKind::If { cond, then, els } => {
            collect_sites(a, cond, env, local, out);
            for (branch, negated) in [(then, false), (els, true)] {
                local.push(ContextClause::BranchImplication {
                    cond: (**cond).clone(),
                    negated,
                });
                collect_sites(a, branch, env, local, out);
                local.pop();
            }
        }
        ExprKind::Let {
            pattern,
            ty,
            value,
            body,
        } => {
            collect_sites(a, value, env, local, out);
            let vt = ty
                .clone()
                .unwrap_or_else(|| infer_type(value, env, &a.symbols).unwrap_or(Type::Any));
            let clause = match (pattern, ty) {
                (Pattern::Ident(n), Some(t)) => ContextClause::LetDef {
                    name: n.clone(),
                    ty: t.clone(),
                    value: (**value).clone(),
                },
                _ => ContextClause::LetPattern {
                    pattern: pattern.clone(),
                    value: (**value).clone(),
                },
            };
            local.push(clause);
            env.push();
            env.declare_pattern(pattern, &vt, Origin::LetBound, &a.symbols);
            collect_sites(a, body, env, local, out);
            env.pop();
            local.pop();
        }
        ExprKind::LetFunctions { defs, body } => {
            local.push(ContextClause::InlineFunctions {
                definitions: defs
                    .iter()
                    .map(|d| InlineFunction {
                        def: d.clone(),
                        flat: false,
                    })
                    .collect(),
                entry: (**body).clone(),
            });
            env.push();
            for d in defs {
                env.declare(&d.name, Type::Any, Origin::LetBound);
            }
            collect_sites(a, body, env, local, out);
            env.pop();
            local.pop();
        }
        ExprKind::Forall { binds, body } => {
            local.push(ContextClause::ForAll(binds.clone()));
            env.push();
            for b in binds {
                env.declare_pattern(&b.pattern, &b.ty, Origin::LetBound, &a.symbols);
            }
            collect_sites(a, body, env, local, out);
            env.pop();
            local.pop();
        }
        ExprKind::Unary { operand, .. } => collect_sites(a, operand, env, local, out),
        ExprKind::Field { record, .. } => collect_sites(a, record, env, local, out),
        ExprKind::MkRecord { args, .. }
        | ExprKind::MkTuple(args)
        | ExprKind::SetEnum(args)
        | ExprKind::SeqEnum(args) => {
            for x in args {
                collect_sites(a, x, env, local, out);
            }
        }
        ExprKind::Mu { record, updates } => {
            collect_sites(a, record, env, local, out);
            for (_, v) in updates {
                collect_sites(a, v, env, local, out);
            }
        }
        ExprKind::Override { base, with } => {
            collect_sites(a, base, env, local, out);
            collect_sites(a, with, env, local, out);
        }
        ExprKind::MapEnum(pairs) => {
            for (k, v) in pairs {
                collect_sites(a, k, env, local, out);
                collect_sites(a, v, env, local, out);
            }
        }
        ExprKind::Number(_) | ExprKind::Bool(_) | ExprKind::Var(_) | ExprKind::Old(_) => {}
    }
}

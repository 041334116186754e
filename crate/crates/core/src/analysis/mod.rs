//! Name resolution, type inference, write sets and loop invariant coverage.

mod env;
mod infer;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use indexmap::IndexSet;

pub use env::{pattern_bindings, Binding, Environment, FunctionSignature, Origin, Symbols};
pub use infer::{compatible, infer_type, join, numeric_join, TypeError};

use crate::ast::*;
use crate::diagnostic::Diagnostic;

/// A resolved module and everything later stages need to know about it.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// The module, with `x := op(args)` rewritten to call statements.
    pub module: ModuleDefinition,
    pub symbols: Symbols,
    /// Classification of every variable reference, keyed by position.
    pub origins: BTreeMap<Pos, Origin>,
    /// Positions of declarations that hide an outer name, per definition.
    pub hiding: HashMap<String, Vec<Pos>>,
    pub write_sets: HashMap<String, WriteSet>,
    pub file: Arc<str>,
}

impl Analysis {
    /// First position in `definition` where a declaration hides another name.
    pub fn first_hiding(&self, definition: &str) -> Option<Pos> {
        self.hiding.get(definition).and_then(|v| v.iter().min().copied())
    }
}

/// Variables a statement may change, in first-write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WriteSet {
    pub names: IndexSet<String>,
    pub per_statement: HashMap<StmtId, IndexSet<String>>,
}

impl WriteSet {
    pub fn of(&self, id: StmtId) -> IndexSet<String> {
        self.per_statement.get(&id).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Writes {
    All,
    Named(IndexSet<String>),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalleeEffects {
    pub callee: String,
    pub writes: Writes,
}

/// What a call to `callee` may write: nothing for pure operations and
/// functions, the `ext wr` list when present, otherwise all state.
pub fn callee_effects(module: &ModuleDefinition, callee: &str) -> Result<CalleeEffects, String> {
    let writes = if let Some(op) = module.operation(callee) {
        if op.is_pure {
            Writes::None
        } else if let Some(wr) = op.ext_writes() {
            Writes::Named(wr.into_iter().collect())
        } else {
            Writes::All
        }
    } else if module.function(callee).is_some() {
        Writes::None
    } else {
        return Err(format!("call to undefined operation '{callee}'"));
    };
    Ok(CalleeEffects {
        callee: callee.to_string(),
        writes,
    })
}

impl CalleeEffects {
    /// The variables the call may change, given the module's state fields.
    pub fn written(&self, state_fields: &[String]) -> IndexSet<String> {
        match &self.writes {
            Writes::All => state_fields.iter().cloned().collect(),
            Writes::Named(n) => n.clone(),
            Writes::None => IndexSet::new(),
        }
    }
}

/// Write sets for every statement of an operation body. A block's set
/// leaves out the variables it declares itself.
pub fn write_sets(op: &OperationDefinition, module: &ModuleDefinition) -> WriteSet {
    let fields = module.state_field_names();
    let mut ws = WriteSet::default();
    ws.names = stmt_writes(&op.body, module, &fields, &mut ws.per_statement);
    ws
}

fn stmt_writes(
    s: &Stmt,
    module: &ModuleDefinition,
    fields: &[String],
    per: &mut HashMap<StmtId, IndexSet<String>>,
) -> IndexSet<String> {
    let mut out = IndexSet::new();
    match &s.kind {
        StmtKind::Assign { target, .. } => {
            out.insert(target.root().to_string());
        }
        StmtKind::Atomic(pairs) => {
            for (d, _) in pairs {
                out.insert(d.root().to_string());
            }
        }
        StmtKind::Call { callee, assign_to, .. } => {
            if let Ok(eff) = callee_effects(module, callee) {
                out.extend(eff.written(fields));
            }
            if let Some(d) = assign_to {
                out.insert(d.root().to_string());
            }
        }
        StmtKind::Block { dcls, body } => {
            for c in body {
                out.extend(stmt_writes(c, module, fields, per));
            }
            out.retain(|n| !dcls.iter().any(|d| &d.name == n));
        }
        StmtKind::If { then, els, .. } => {
            out.extend(stmt_writes(then, module, fields, per));
            if let Some(e) = els {
                out.extend(stmt_writes(e, module, fields, per));
            }
        }
        StmtKind::While { body, .. } => out.extend(stmt_writes(body, module, fields, per)),
        StmtKind::ForIndex { var, body, .. } | StmtKind::ForSeq { var, body, .. } => {
            out.extend(stmt_writes(body, module, fields, per));
            out.shift_remove(var);
        }
        StmtKind::Return(_) => {}
    }
    per.insert(s.id, out.clone());
    out
}

/// An error for each variable the loop writes that its invariant never mentions.
pub fn check_invariant_coverage(lp: &Stmt, ws: &WriteSet, file: &Arc<str>) -> Vec<Diagnostic> {
    let Some(inv) = lp.loop_invariant() else {
        return Vec::new();
    };
    let free = inv.free_variables();
    ws.of(lp.id)
        .iter()
        .filter(|v| !free.contains(*v))
        .map(|v| {
            Diagnostic::error(
                file,
                lp.pos,
                format!("@LoopInvariant does not mention '{v}', which the loop modifies"),
            )
        })
        .collect()
}

/// Every loop in a statement tree, outermost first.
pub fn loops(s: &Stmt) -> Vec<&Stmt> {
    let mut out = Vec::new();
    collect_loops(s, &mut out);
    out
}

fn collect_loops<'a>(s: &'a Stmt, out: &mut Vec<&'a Stmt>) {
    if s.is_loop() {
        out.push(s);
    }
    for c in s.children() {
        collect_loops(c, out);
    }
}

/// Resolution, write sets and coverage in one pass.
pub fn analyze(module: ModuleDefinition, file: &str) -> (Analysis, Vec<Diagnostic>) {
    let (mut a, mut diags) = resolve(module, file);
    for op in &a.module.operations {
        let ws = write_sets(op, &a.module);
        for lp in loops(&op.body) {
            diags.extend(check_invariant_coverage(lp, &ws, &a.file));
        }
        a.write_sets.insert(op.name.clone(), ws);
    }
    (a, diags)
}

struct Resolver {
    syms: Symbols,
    file: Arc<str>,
    diags: Vec<Diagnostic>,
    origins: BTreeMap<Pos, Origin>,
    hiding: HashMap<String, Vec<Pos>>,
    definition: String,
}

/// Classifies variable references, checks types and rewrites operation
/// calls on assignment right-hand sides into call statements.
pub fn resolve(mut module: ModuleDefinition, file: &str) -> (Analysis, Vec<Diagnostic>) {
    let mut r = Resolver {
        syms: Symbols::from_module(&module),
        file: Arc::from(file),
        diags: Vec::new(),
        origins: BTreeMap::new(),
        hiding: HashMap::new(),
        definition: String::new(),
    };
    r.check_top_level(&module);

    // Values may refer to earlier values.
    for v in &module.values {
        let env = Environment::new();
        match infer_type(&v.value, &env, &r.syms) {
            Ok(t) => {
                if let Some(decl) = &v.ty {
                    if !compatible(&t, decl, &r.syms) {
                        r.error(
                            v.value.pos,
                            format!("value '{}' does not match its declared type", v.name),
                        );
                    }
                } else {
                    r.syms.set_value_type(&v.name, t);
                }
            }
            Err(e) => r.error(e.pos, e.message),
        }
    }

    if let Some(st) = &module.state {
        if let Some(inv) = &st.invariant {
            r.definition = format!("inv_{}", st.name);
            r.invariant_clause(inv, &Type::Named(st.name.clone()));
        }
    }
    for t in &module.types {
        if let Some(inv) = &t.invariant {
            r.definition = format!("inv_{}", t.name);
            r.invariant_clause(inv, &Type::Named(t.name.clone()));
        }
    }
    for f in &module.functions {
        r.function(f);
    }
    let fields: Vec<Field> = module.state.as_ref().map(|s| s.fields.clone()).unwrap_or_default();
    for op in &mut module.operations {
        r.operation(op, &fields);
    }

    let analysis = Analysis {
        module,
        symbols: r.syms,
        origins: r.origins,
        hiding: r.hiding,
        write_sets: HashMap::new(),
        file: r.file,
    };
    (analysis, r.diags)
}

impl Resolver {
    fn error(&mut self, pos: Pos, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(&self.file, pos, msg));
    }

    fn warning(&mut self, pos: Pos, msg: impl Into<String>) {
        self.diags.push(Diagnostic::warning(&self.file, pos, msg));
    }

    fn check_top_level(&mut self, m: &ModuleDefinition) {
        let mut seen: HashMap<String, Pos> = HashMap::new();
        let mut names: Vec<(String, Pos)> = Vec::new();
        if let Some(s) = &m.state {
            names.push((s.name.clone(), s.pos));
            let mut fields = IndexSet::new();
            for f in &s.fields {
                if !fields.insert(f.name.clone()) {
                    self.error(s.pos, format!("duplicate state field '{}'", f.name));
                }
            }
        }
        names.extend(m.types.iter().map(|t| (t.name.clone(), t.pos)));
        names.extend(m.aliases.iter().map(|t| (t.name.clone(), t.pos)));
        names.extend(m.values.iter().map(|t| (t.name.clone(), t.pos)));
        names.extend(m.functions.iter().map(|t| (t.name.clone(), t.pos)));
        names.extend(m.operations.iter().map(|t| (t.name.clone(), t.pos)));
        for (n, p) in names {
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(n.clone()) {
                e.insert(p);
            } else {
                self.error(p, format!("duplicate definition of '{n}'"));
            }
        }
        let fields = m.state_field_names();
        for op in &m.operations {
            if let Some(ext) = &op.ext {
                for c in ext {
                    for v in &c.variables {
                        if !fields.contains(v) {
                            self.error(
                                op.pos,
                                format!("ext clause of '{}' names '{v}', which is not a state variable", op.name),
                            );
                        }
                    }
                }
            }
            if op.is_pure && op.ext_writes().is_some_and(|w| !w.is_empty()) {
                self.error(
                    op.pos,
                    format!("pure operation '{}' cannot have an ext wr clause", op.name),
                );
            }
        }
    }

    fn hide_check(&mut self, name: &str, pos: Pos, env: &Environment) {
        if let Some(b) = env.lookup(name) {
            let what = match b.origin {
                Origin::Parameter => "parameter",
                Origin::StateField => "state variable",
                Origin::Dcl => "local variable",
                Origin::LetBound => "let-bound name",
                Origin::LoopVariable => "loop variable",
                Origin::Result => "result",
                Origin::Value => "value",
            };
            self.warning(pos, format!("'{name}' hides the {what} of the same name"));
            self.hiding.entry(self.definition.clone()).or_default().push(pos);
        } else if self.syms.value(name).is_some() {
            self.warning(pos, format!("'{name}' hides the value of the same name"));
            self.hiding.entry(self.definition.clone()).or_default().push(pos);
        }
    }

    /// Records origins and hiding for an expression, then type checks it.
    fn expr(&mut self, e: &Expr, env: &Environment, allow_old: bool) -> Type {
        let mut scoped = env.clone();
        self.walk(e, &mut scoped, allow_old);
        match infer_type(e, env, &self.syms) {
            Ok(t) => t,
            Err(te) => {
                self.error(te.pos, te.message);
                Type::Any
            }
        }
    }

    fn expect(&mut self, e: &Expr, env: &Environment, want: &Type, what: &str) {
        let t = self.expr(e, env, false);
        if !compatible(&t, want, &self.syms) {
            self.error(
                e.pos,
                format!(
                    "{what} expects {}, found {}",
                    crate::render::render_type(want),
                    crate::render::render_type(&t)
                ),
            );
        }
    }

    fn walk(&mut self, e: &Expr, env: &mut Environment, allow_old: bool) {
        match &e.kind {
            ExprKind::Var(v) => {
                if let Some(b) = env.lookup(v) {
                    self.origins.insert(e.pos, b.origin);
                } else if self.syms.value(v).is_some() {
                    self.origins.insert(e.pos, Origin::Value);
                }
            }
            ExprKind::Old(v) => {
                if !allow_old {
                    self.error(e.pos, format!("'{v}~' may only appear in a postcondition"));
                }
            }
            ExprKind::Apply { root, args } => {
                if !matches!(&root.kind, ExprKind::Var(n) if env.lookup(n).is_none()) {
                    self.walk(root, env, allow_old);
                }
                for a in args {
                    self.walk(a, env, allow_old);
                }
            }
            ExprKind::Let {
                pattern,
                ty,
                value,
                body,
            } => {
                self.walk(value, env, allow_old);
                let t = ty
                    .clone()
                    .unwrap_or_else(|| infer_type(value, env, &self.syms).unwrap_or(Type::Any));
                for n in pattern.names() {
                    self.hide_check(&n, e.pos, env);
                }
                env.push();
                env.declare_pattern(pattern, &t, Origin::LetBound, &self.syms);
                self.walk(body, env, allow_old);
                env.pop();
            }
            ExprKind::LetFunctions { defs, body } => {
                env.push();
                for d in defs {
                    env.declare(&d.name, Type::Any, Origin::LetBound);
                }
                for d in defs {
                    env.push();
                    for p in &d.params {
                        env.declare(&p.name, p.ty.clone(), Origin::Parameter);
                    }
                    self.walk(&d.body, env, allow_old);
                    env.pop();
                }
                self.walk(body, env, allow_old);
                env.pop();
            }
            ExprKind::Forall { binds, body } => {
                env.push();
                for b in binds {
                    for n in b.pattern.names() {
                        self.hide_check(&n, e.pos, env);
                    }
                    env.declare_pattern(&b.pattern, &b.ty, Origin::LetBound, &self.syms);
                }
                self.walk(body, env, allow_old);
                env.pop();
            }
            _ => e.for_each_child(&mut |c| self.walk(c, env, allow_old)),
        }
    }

    fn invariant_clause(&mut self, inv: &Invariant, ty: &Type) {
        let mut env = Environment::new();
        env.push();
        env.declare_pattern(&inv.pattern, ty, Origin::Parameter, &self.syms);
        self.expect(&inv.body, &env, &Type::Bool, "an invariant");
    }

    fn function(&mut self, f: &FunctionDefinition) {
        self.definition = f.name.clone();
        let mut env = Environment::new();
        env.push();
        for p in &f.params {
            env.declare(&p.name, p.ty.clone(), Origin::Parameter);
        }
        self.expect(&f.body, &env, &f.result_type, &format!("the body of '{}'", f.name));
        if let Some(pre) = &f.pre {
            self.expect(pre, &env, &Type::Bool, "a precondition");
        }
        if let Some(post) = &f.post {
            env.push();
            let r = f.result_name.clone().unwrap_or_else(|| "RESULT".into());
            env.declare(&r, f.result_type.clone(), Origin::Result);
            self.expect(post, &env, &Type::Bool, "a postcondition");
            env.pop();
        }
    }

    fn operation(&mut self, op: &mut OperationDefinition, fields: &[Field]) {
        self.definition = op.name.clone();
        let mut env = Environment::new();
        for f in fields {
            env.declare(&f.name, f.ty.clone(), Origin::StateField);
        }
        env.push();
        for p in &op.params {
            self.hide_check(&p.name, op.pos, &env);
            env.declare(&p.name, p.ty.clone(), Origin::Parameter);
        }
        if let Some(pre) = &op.pre {
            self.expect(pre, &env, &Type::Bool, "a precondition");
        }
        if let Some(post) = &op.post {
            let mut penv = env.clone();
            penv.push();
            if let Some(rt) = &op.result_type {
                let r = op.result_name.clone().unwrap_or_else(|| "RESULT".into());
                penv.declare(&r, rt.clone(), Origin::Result);
            }
            let mut scoped = penv.clone();
            self.walk(post, &mut scoped, true);
            match infer_type(post, &penv, &self.syms) {
                Ok(t) if compatible(&t, &Type::Bool, &self.syms) => {}
                Ok(_) => self.error(post.pos, "a postcondition must be boolean"),
                Err(te) => self.error(te.pos, te.message),
            }
        }
        let ctx = OpContext {
            result_type: op.result_type.clone(),
        };
        self.stmt(&mut op.body, &mut env, &ctx);
    }

    fn designator_type(&mut self, d: &Designator, env: &Environment) -> Option<Type> {
        match d {
            Designator::Name { name, pos } => match env.lookup(name) {
                Some(b) if b.origin.is_assignable() => {
                    self.origins.insert(*pos, b.origin);
                    Some(b.ty.clone())
                }
                Some(b) => {
                    let what = match b.origin {
                        Origin::Parameter => "parameter",
                        Origin::LoopVariable => "loop variable",
                        _ => "name",
                    };
                    self.error(*pos, format!("cannot assign to {what} '{name}'"));
                    None
                }
                None => {
                    self.error(*pos, format!("unresolved identifier '{name}'"));
                    None
                }
            },
            Designator::Index { base, index } => {
                let bt = self.designator_type(base, env)?;
                let it = self.expr(index, env, false);
                match self.syms.normalize(&bt) {
                    Type::Map(dom, r) => {
                        if !compatible(&it, &dom, &self.syms) {
                            self.error(index.pos, "map key does not match the map's domain type");
                        }
                        Some(*r)
                    }
                    Type::Seq(el) => {
                        if !it.is_numeric() && it != Type::Any {
                            self.error(index.pos, "sequence index must be numeric");
                        }
                        Some(*el)
                    }
                    other => {
                        self.error(
                            d.pos(),
                            format!("cannot index a value of type {}", crate::render::render_type(&other)),
                        );
                        None
                    }
                }
            }
            Designator::Field { base, field, pos } => {
                let bt = self.designator_type(base, env)?;
                match self.syms.normalize(&bt) {
                    Type::Named(r) => {
                        let ft = self
                            .syms
                            .record(&r)
                            .and_then(|def| def.field(field))
                            .map(|f| f.ty.clone());
                        if ft.is_none() {
                            self.error(*pos, format!("record {r} has no field '{field}'"));
                        }
                        ft
                    }
                    other => {
                        self.error(
                            *pos,
                            format!(
                                "field '{field}' selected from non-record type {}",
                                crate::render::render_type(&other)
                            ),
                        );
                        None
                    }
                }
            }
        }
    }

    fn call_target(&self, e: &Expr, env: &Environment) -> Option<(String, Vec<Expr>)> {
        match &e.kind {
            ExprKind::Apply { root, args } => match &root.kind {
                ExprKind::Var(n) if env.lookup(n).is_none() && self.syms.operation(n).is_some() => {
                    Some((n.clone(), args.clone()))
                }
                _ => None,
            },
            _ => None,
        }
    }

    fn stmt(&mut self, s: &mut Stmt, env: &mut Environment, ctx: &OpContext) {
        if let StmtKind::Assign { target, rhs } = &s.kind {
            if let Some((callee, args)) = self.call_target(rhs, env) {
                s.kind = StmtKind::Call {
                    callee,
                    args,
                    assign_to: Some(target.clone()),
                };
            }
        }
        let pos = s.pos;
        match &mut s.kind {
            StmtKind::Block { dcls, body } => {
                env.push();
                for d in dcls.iter() {
                    if env.in_current_layer(&d.name) {
                        self.error(d.pos, format!("duplicate declaration of '{}' in this block", d.name));
                    } else {
                        self.hide_check(&d.name, d.pos, env);
                    }
                    if let Some(init) = &d.init {
                        if self.call_target(init, env).is_some() {
                            self.error(init.pos, "operation calls in dcl initializers are not supported; assign the result after the declaration");
                        } else {
                            self.expect(init, env, &d.ty, &format!("the initializer of '{}'", d.name));
                        }
                    }
                    env.declare(&d.name, d.ty.clone(), Origin::Dcl);
                }
                for c in body.iter_mut() {
                    self.stmt(c, env, ctx);
                }
                env.pop();
            }
            StmtKind::Assign { target, rhs } => {
                let dt = self.designator_type(target, env);
                let rt = self.expr(rhs, env, false);
                if let Some(dt) = dt {
                    if !compatible(&rt, &dt, &self.syms) {
                        self.error(
                            rhs.pos,
                            format!(
                                "cannot assign {} to '{}' of type {}",
                                crate::render::render_type(&rt),
                                target.root(),
                                crate::render::render_type(&dt)
                            ),
                        );
                    }
                }
            }
            StmtKind::If { cond, then, els } => {
                self.expect(cond, env, &Type::Bool, "an if condition");
                self.stmt(then, env, ctx);
                if let Some(e) = els {
                    self.stmt(e, env, ctx);
                }
            }
            StmtKind::While { cond, body, invariant } => {
                self.expect(cond, env, &Type::Bool, "a while condition");
                if let Some(inv) = invariant {
                    self.expect(inv, env, &Type::Bool, "a loop invariant");
                }
                self.stmt(body, env, ctx);
            }
            StmtKind::ForIndex {
                var,
                from,
                to,
                by,
                body,
                invariant,
            } => {
                let ft = self.expr(from, env, false);
                let tt = self.expr(to, env, false);
                for (e, t) in [(&*from, &ft), (&*to, &tt)] {
                    if !t.is_numeric() && *t != Type::Any {
                        self.error(e.pos, "for loop bounds must be numeric");
                    }
                }
                if let Some(b) = by {
                    self.expect(b, env, &Type::Int, "a for loop step");
                }
                let vt = if matches!(ft, Type::Nat | Type::Nat1) && by.is_none() {
                    ft.clone()
                } else {
                    Type::Int
                };
                self.hide_check(var, pos, env);
                env.push();
                env.declare(var, vt, Origin::LoopVariable);
                if let Some(inv) = invariant {
                    self.expect(inv, env, &Type::Bool, "a loop invariant");
                }
                self.stmt(body, env, ctx);
                env.pop();
            }
            StmtKind::ForSeq {
                var,
                seq,
                body,
                invariant,
            } => {
                let st = self.expr(seq, env, false);
                let el = match self.syms.normalize(&st) {
                    Type::Seq(el) => *el,
                    Type::Any => Type::Any,
                    other => {
                        self.error(
                            seq.pos,
                            format!(
                                "for loop expects a sequence, found {}",
                                crate::render::render_type(&other)
                            ),
                        );
                        Type::Any
                    }
                };
                self.hide_check(var, pos, env);
                env.push();
                env.declare(var, el, Origin::LoopVariable);
                if let Some(inv) = invariant {
                    self.expect(inv, env, &Type::Bool, "a loop invariant");
                }
                self.stmt(body, env, ctx);
                env.pop();
            }
            StmtKind::Atomic(pairs) => {
                for (target, rhs) in pairs.iter() {
                    let dt = self.designator_type(target, env);
                    if self.call_target(rhs, env).is_some() {
                        self.error(rhs.pos, "operation calls are not allowed inside atomic statements");
                        continue;
                    }
                    let rt = self.expr(rhs, env, false);
                    if let Some(dt) = dt {
                        if !compatible(&rt, &dt, &self.syms) {
                            self.error(rhs.pos, format!("cannot assign to '{}': type mismatch", target.root()));
                        }
                    }
                }
            }
            StmtKind::Return(value) => match (value, &ctx.result_type) {
                (Some(v), Some(rt)) => {
                    let rt = rt.clone();
                    self.expect(v, env, &rt, "a return value");
                }
                (Some(v), None) => self.error(v.pos, "operation has no result type but returns a value"),
                (None, Some(_)) => self.error(pos, "operation with a result type must return a value"),
                (None, None) => {}
            },
            StmtKind::Call {
                callee,
                args,
                assign_to,
            } => {
                let sig = self.syms.operation(callee).cloned();
                match sig {
                    None => {
                        if self.syms.function(callee).is_some() {
                            self.error(pos, format!("function '{callee}' cannot be called as a statement"));
                        } else {
                            self.error(pos, format!("call to undefined operation '{callee}'"));
                        }
                    }
                    Some(sig) => {
                        if sig.params.len() != args.len() {
                            self.error(
                                pos,
                                format!(
                                    "'{callee}' expects {} arguments, found {}",
                                    sig.params.len(),
                                    args.len()
                                ),
                            );
                        }
                        for (a, t) in args.iter().zip(&sig.params) {
                            self.expect(a, env, t, &format!("an argument of '{callee}'"));
                        }
                        if let Some(d) = assign_to {
                            let dt = self.designator_type(d, env);
                            if sig.result == Type::Product(Vec::new()) {
                                self.error(pos, format!("'{callee}' returns no value"));
                            } else if let Some(dt) = dt {
                                if !compatible(&sig.result, &dt, &self.syms) {
                                    self.error(pos, format!("result of '{callee}' does not match '{}'", d.root()));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

struct OpContext {
    result_type: Option<Type>,
}

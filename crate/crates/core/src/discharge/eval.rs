//! Expression evaluation with exact arithmetic.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::time::Instant;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::space;
use super::value::Value;
use super::Bounds;
use crate::ast::{
    old_state_name, BinaryOp, Bind, ContextClause, Expr, ExprKind, FunctionDefinition, ModuleDefinition, Pattern, Pos,
    RecordDefinition, Type, UnaryOp,
};

/// Nested user-function calls allowed before evaluation gives up.
const MAX_CALL_DEPTH: u32 = 200;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    /// A run-time fault such as division by zero.
    #[error("{pos}: {reason}")]
    Fault { pos: Pos, reason: String },
    /// The deadline passed or a resource limit was hit.
    #[error("{0}")]
    Budget(String),
    /// A name with no binding. Closed obligations never produce this.
    #[error("unbound name '{0}'")]
    Unbound(String),
    #[error("{0}")]
    Unsupported(String),
}

fn fault<T>(pos: Pos, reason: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError::Fault {
        pos,
        reason: reason.into(),
    })
}

type R<T> = Result<T, EvalError>;

#[derive(Clone)]
enum Entry {
    Val(Value),
    Fun(Rc<Closure>),
}

struct Closure {
    defs: Rc<Vec<FunctionDefinition>>,
    index: usize,
    env: Env,
}

struct Frame {
    name: String,
    entry: Entry,
    next: Env,
}

/// A persistent name-to-value environment. Binding returns a new env that
/// shares its tail with the old one.
#[derive(Clone, Default)]
pub struct Env(Option<Rc<Frame>>);

impl Env {
    pub fn new() -> Env {
        Env(None)
    }

    pub fn bind(&self, name: &str, v: Value) -> Env {
        self.push(name, Entry::Val(v))
    }

    fn push(&self, name: &str, entry: Entry) -> Env {
        Env(Some(Rc::new(Frame {
            name: name.to_string(),
            entry,
            next: self.clone(),
        })))
    }

    fn entry(&self, name: &str) -> Option<&Entry> {
        let mut cur = self.0.as_ref();
        while let Some(f) = cur {
            if f.name == name {
                return Some(&f.entry);
            }
            cur = f.next.0.as_ref();
        }
        None
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        match self.entry(name) {
            Some(Entry::Val(v)) => Some(v),
            _ => None,
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Value)>) -> Env {
        pairs.into_iter().fold(Env::new(), |env, (n, v)| env.bind(n, v))
    }
}

/// Evaluates expressions against one module. Not shareable across
/// threads; build one per discharge task.
pub struct Evaluator<'m> {
    module: &'m ModuleDefinition,
    records: HashMap<String, RecordDefinition>,
    bounds: Bounds,
    deadline: Option<Instant>,
    values: RefCell<HashMap<String, Value>>,
    depth: Cell<u32>,
    ticks: Cell<u32>,
}

fn num(n: &BigInt) -> Value {
    Value::Num(BigRational::from_integer(n.clone()))
}

fn parse_number(text: &str) -> Option<BigRational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    })
}

impl<'m> Evaluator<'m> {
    pub fn new(module: &'m ModuleDefinition, bounds: Bounds, deadline: Option<Instant>) -> Evaluator<'m> {
        let mut records: HashMap<String, RecordDefinition> =
            module.types.iter().map(|r| (r.name.clone(), r.clone())).collect();
        if let Some(st) = &module.state {
            records.insert(st.name.clone(), st.as_record());
        }
        Evaluator {
            module,
            records,
            bounds,
            deadline,
            values: RefCell::new(HashMap::new()),
            depth: Cell::new(0),
            ticks: Cell::new(0),
        }
    }

    pub fn module(&self) -> &'m ModuleDefinition {
        self.module
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn alias(&self, name: &str) -> Option<&'m Type> {
        self.module.alias(name).map(|a| &a.ty)
    }

    pub fn record_def(&self, name: &str) -> Option<&RecordDefinition> {
        self.records.get(name)
    }

    /// Checks the deadline every so often.
    pub fn tick(&self) -> R<()> {
        let t = self.ticks.get().wrapping_add(1);
        self.ticks.set(t);
        if t.is_multiple_of(256) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(EvalError::Budget("timeout".into()));
                }
            }
        }
        Ok(())
    }

    pub fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn evaluate(&self, e: &Expr, env: &Env) -> R<Value> {
        self.tick()?;
        let pos = e.pos;
        match &e.kind {
            ExprKind::Number(text) => match parse_number(text) {
                Some(n) => Ok(Value::Num(n)),
                None => fault(pos, format!("malformed number '{text}'")),
            },
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(name) => self.lookup(name, env),
            ExprKind::Old(name) => self.lookup(&old_state_name(name), env),
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, env, pos),
            ExprKind::Unary { op, operand } => {
                let v = self.evaluate(operand, env)?;
                self.unary(*op, v, pos)
            }
            ExprKind::Apply { root, args } => self.apply(root, args, env, pos),
            ExprKind::Field { record, field } => {
                let r = self.evaluate(record, env)?;
                self.field(&r, field, pos)
            }
            ExprKind::MkRecord { name, maximal, args } => {
                let fields = args.iter().map(|a| self.evaluate(a, env)).collect::<R<Vec<_>>>()?;
                self.make_record(name, fields, *maximal, pos)
            }
            ExprKind::MkTuple(items) => Ok(Value::Tuple(
                items.iter().map(|a| self.evaluate(a, env)).collect::<R<_>>()?,
            )),
            ExprKind::Mu { record, updates } => {
                let r = self.evaluate(record, env)?;
                let Value::Record { name, mut fields, .. } = r else {
                    return fault(pos, "mu applied to a non-record value");
                };
                let def = self.record(&name, pos)?;
                for (f, ue) in updates {
                    let i = def.field_index(f).ok_or_else(|| EvalError::Fault {
                        pos,
                        reason: format!("record {name} has no field '{f}'"),
                    })?;
                    fields[i] = self.evaluate(ue, env)?;
                }
                self.make_record(&name, fields, false, pos)
            }
            ExprKind::Override { base, with } => {
                let b = self.evaluate(base, env)?;
                let w = self.evaluate(with, env)?;
                override_value(b, w, pos)
            }
            ExprKind::SetEnum(items) => Ok(Value::Set(
                items.iter().map(|a| self.evaluate(a, env)).collect::<R<_>>()?,
            )),
            ExprKind::SeqEnum(items) => Ok(Value::Seq(
                items.iter().map(|a| self.evaluate(a, env)).collect::<R<_>>()?,
            )),
            ExprKind::MapEnum(pairs) => {
                let mut m = BTreeMap::new();
                for (k, v) in pairs {
                    let k = self.evaluate(k, env)?;
                    let v = self.evaluate(v, env)?;
                    if let Some(prev) = m.get(&k) {
                        if *prev != v {
                            return fault(pos, format!("map enumeration gives {k} two values"));
                        }
                    }
                    m.insert(k, v);
                }
                Ok(Value::Map(m))
            }
            ExprKind::Let {
                pattern, value, body, ..
            } => {
                let v = self.evaluate(value, env)?;
                match bind_pattern(pattern, &v, env) {
                    Some(env2) => self.evaluate(body, &env2),
                    None => fault(pos, format!("value {v} does not match the let pattern")),
                }
            }
            ExprKind::LetFunctions { defs, body } => {
                let env2 = bind_functions(Rc::new(defs.clone()), env);
                self.evaluate(body, &env2)
            }
            ExprKind::Forall { binds, body } => self.forall(binds, body, env),
            ExprKind::If { cond, then, els } => {
                if self.boolean(cond, env)? {
                    self.evaluate(then, env)
                } else {
                    self.evaluate(els, env)
                }
            }
        }
    }

    fn boolean(&self, e: &Expr, env: &Env) -> R<bool> {
        match self.evaluate(e, env)? {
            Value::Bool(b) => Ok(b),
            v => fault(e.pos, format!("expected a boolean, found {v}")),
        }
    }

    fn lookup(&self, name: &str, env: &Env) -> R<Value> {
        match env.entry(name) {
            Some(Entry::Val(v)) => return Ok(v.clone()),
            Some(Entry::Fun(_)) => return Err(EvalError::Unsupported(format!("function '{name}' used as a value"))),
            None => {}
        }
        self.module_value(name)
    }

    fn module_value(&self, name: &str) -> R<Value> {
        if let Some(v) = self.values.borrow().get(name) {
            return Ok(v.clone());
        }
        let def = self
            .module
            .values
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
        let v = self.evaluate(&def.value, &Env::new())?;
        self.values.borrow_mut().insert(name.to_string(), v.clone());
        Ok(v)
    }

    fn record(&self, name: &str, pos: Pos) -> R<&RecordDefinition> {
        match self.records.get(name) {
            Some(r) => Ok(r),
            None => fault(pos, format!("unknown record type '{name}'")),
        }
    }

    fn field(&self, r: &Value, field: &str, pos: Pos) -> R<Value> {
        let Value::Record { name, fields, .. } = r else {
            return fault(pos, format!("field '{field}' selected from non-record {r}"));
        };
        let def = self.record(name, pos)?;
        match def.field_index(field) {
            Some(i) => Ok(fields[i].clone()),
            None => fault(pos, format!("record {name} has no field '{field}'")),
        }
    }

    /// Builds a record. The invariant is checked unless `maximal`.
    pub fn make_record(&self, name: &str, fields: Vec<Value>, maximal: bool, pos: Pos) -> R<Value> {
        let def = self.record(name, pos)?;
        if def.fields.len() != fields.len() {
            return fault(pos, format!("mk_{name} expects {} fields", def.fields.len()));
        }
        let has_inv = def.invariant.is_some();
        let v = Value::Record {
            name: name.to_string(),
            fields,
            checked: !has_inv,
        };
        if maximal || !has_inv {
            return Ok(v);
        }
        if self.invariant_holds(&v, pos)? {
            Ok(mark_checked(v))
        } else {
            fault(pos, format!("{v} violates the invariant of {name}"))
        }
    }

    /// Evaluates `inv_T` on a record value, ignoring its `checked` flag.
    fn invariant_holds(&self, v: &Value, pos: Pos) -> R<bool> {
        let Value::Record { name, .. } = v else {
            return Ok(true);
        };
        let def = self.record(name, pos)?;
        let Some(inv) = &def.invariant else {
            return Ok(true);
        };
        match bind_pattern(&inv.pattern, v, &Env::new()) {
            Some(env) => self.boolean(&inv.body, &env),
            None => fault(pos, "invariant pattern does not match"),
        }
    }

    /// True when every unchecked record inside `v` satisfies its invariant.
    pub fn satisfies_invariants(&self, v: &Value) -> R<bool> {
        Ok(match v {
            Value::Num(_) | Value::Bool(_) => true,
            Value::Seq(xs) | Value::Tuple(xs) => {
                for x in xs {
                    if !self.satisfies_invariants(x)? {
                        return Ok(false);
                    }
                }
                true
            }
            Value::Set(xs) => {
                for x in xs {
                    if !self.satisfies_invariants(x)? {
                        return Ok(false);
                    }
                }
                true
            }
            Value::Map(m) => {
                for (k, x) in m {
                    if !self.satisfies_invariants(k)? || !self.satisfies_invariants(x)? {
                        return Ok(false);
                    }
                }
                true
            }
            Value::Record { fields, checked, .. } => {
                for x in fields {
                    if !self.satisfies_invariants(x)? {
                        return Ok(false);
                    }
                }
                *checked || self.invariant_holds(v, Pos::default())?
            }
        })
    }

    /// Whether `v` is a member of `t` (records by name, invariants
    /// included).
    pub fn is_member(&self, v: &Value, t: &Type) -> R<bool> {
        let all = |xs: &mut dyn Iterator<Item = &Value>, t: &Type| -> R<bool> {
            for x in xs {
                if !self.is_member(x, t)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        Ok(match (t, v) {
            (Type::Any, _) => true,
            (Type::Nat, Value::Num(n)) => n.is_integer() && !n.is_negative(),
            (Type::Nat1, Value::Num(n)) => n.is_integer() && n.is_positive(),
            (Type::Int, Value::Num(n)) => n.is_integer(),
            (Type::Real, Value::Num(_)) => true,
            (Type::Bool, Value::Bool(_)) => true,
            (Type::Seq(e), Value::Seq(xs)) => all(&mut xs.iter(), e)?,
            (Type::Set(e), Value::Set(xs)) => all(&mut xs.iter(), e)?,
            (Type::Map(d, r), Value::Map(m)) => all(&mut m.keys(), d)? && all(&mut m.values(), r)?,
            (Type::Product(ts), Value::Tuple(xs)) => {
                ts.len() == xs.len() && {
                    for (x, t) in xs.iter().zip(ts) {
                        if !self.is_member(x, t)? {
                            return Ok(false);
                        }
                    }
                    true
                }
            }
            (Type::Named(n), _) => {
                if let Some(a) = self.alias(n) {
                    return self.is_member(v, a);
                }
                let Value::Record { name, fields, .. } = v else {
                    return Ok(false);
                };
                if name != n {
                    return Ok(false);
                }
                let def = self.record(n, Pos::default())?;
                for (x, f) in fields.iter().zip(&def.fields) {
                    if !self.is_member(x, &f.ty)? {
                        return Ok(false);
                    }
                }
                self.invariant_holds(v, Pos::default())?
            }
            _ => false,
        })
    }

    fn numbers(&self, a: Value, b: Value, pos: Pos) -> R<(BigRational, BigRational)> {
        match (a, b) {
            (Value::Num(x), Value::Num(y)) => Ok((x, y)),
            (x, y) => fault(pos, format!("expected numbers, found {x} and {y}")),
        }
    }

    fn integers(&self, a: Value, b: Value, pos: Pos) -> R<(BigInt, BigInt)> {
        let (x, y) = self.numbers(a, b, pos)?;
        if !x.is_integer() || !y.is_integer() {
            return fault(
                pos,
                format!("expected integers, found {} and {}", Value::Num(x), Value::Num(y)),
            );
        }
        if y.is_zero() {
            return fault(pos, "division by zero");
        }
        Ok((x.to_integer(), y.to_integer()))
    }

    fn sets(&self, a: Value, b: Value, pos: Pos) -> R<(BTreeSet<Value>, BTreeSet<Value>)> {
        match (a, b) {
            (Value::Set(x), Value::Set(y)) => Ok((x, y)),
            (x, y) => fault(pos, format!("expected sets, found {x} and {y}")),
        }
    }

    fn binary(&self, op: BinaryOp, lhs: &Expr, rhs: &Expr, env: &Env, pos: Pos) -> R<Value> {
        use BinaryOp::*;
        match op {
            And => return Ok(Value::Bool(self.boolean(lhs, env)? && self.boolean(rhs, env)?)),
            Or => return Ok(Value::Bool(self.boolean(lhs, env)? || self.boolean(rhs, env)?)),
            Implies => return Ok(Value::Bool(!self.boolean(lhs, env)? || self.boolean(rhs, env)?)),
            _ => {}
        }
        let a = self.evaluate(lhs, env)?;
        let b = self.evaluate(rhs, env)?;
        Ok(match op {
            Add | Sub | Mul | Div | Lt | Gt | Le | Ge => {
                let (x, y) = self.numbers(a, b, pos)?;
                match op {
                    Add => Value::Num(x + y),
                    Sub => Value::Num(x - y),
                    Mul => Value::Num(x * y),
                    Div => {
                        if y.is_zero() {
                            return fault(pos, "division by zero");
                        }
                        Value::Num(x / y)
                    }
                    Lt => Value::Bool(x < y),
                    Gt => Value::Bool(x > y),
                    Le => Value::Bool(x <= y),
                    _ => Value::Bool(x >= y),
                }
            }
            IntDiv | Mod | Rem => {
                let (x, y) = self.integers(a, b, pos)?;
                num(&match op {
                    IntDiv => &x / &y,
                    Mod => x.mod_floor(&y),
                    _ => &x % &y,
                })
            }
            Eq => Value::Bool(a == b),
            Ne => Value::Bool(a != b),
            Iff => match (a, b) {
                (Value::Bool(x), Value::Bool(y)) => Value::Bool(x == y),
                (x, y) => return fault(pos, format!("expected booleans, found {x} and {y}")),
            },
            InSet | NotInSet => match b {
                Value::Set(s) => Value::Bool(s.contains(&a) == (op == InSet)),
                other => return fault(pos, format!("expected a set, found {other}")),
            },
            Subset => {
                let (x, y) = self.sets(a, b, pos)?;
                Value::Bool(x.is_subset(&y))
            }
            Union | Inter | Difference => {
                let (x, y) = self.sets(a, b, pos)?;
                Value::Set(match op {
                    Union => x.union(&y).cloned().collect(),
                    Inter => x.intersection(&y).cloned().collect(),
                    _ => x.difference(&y).cloned().collect(),
                })
            }
            Concat => match (a, b) {
                (Value::Seq(mut x), Value::Seq(y)) => {
                    x.extend(y);
                    Value::Seq(x)
                }
                (x, y) => return fault(pos, format!("expected sequences, found {x} and {y}")),
            },
            And | Or | Implies => unreachable!(),
        })
    }

    fn unary(&self, op: UnaryOp, v: Value, pos: Pos) -> R<Value> {
        use UnaryOp::*;
        Ok(match (op, v) {
            (Not, Value::Bool(b)) => Value::Bool(!b),
            (Neg, Value::Num(n)) => Value::Num(-n),
            (Plus, Value::Num(n)) => Value::Num(n),
            (Abs, Value::Num(n)) => Value::Num(n.abs()),
            (Floor, Value::Num(n)) => Value::Num(n.floor()),
            (Len, Value::Seq(s)) => Value::int(s.len() as i64),
            (Elems, Value::Seq(s)) => Value::Set(s.into_iter().collect()),
            (Inds, Value::Seq(s)) => Value::Set((1..=s.len() as i64).map(Value::int).collect()),
            (Hd, Value::Seq(s)) => match s.into_iter().next() {
                Some(x) => x,
                None => return fault(pos, "hd of an empty sequence"),
            },
            (Tl, Value::Seq(s)) => {
                if s.is_empty() {
                    return fault(pos, "tl of an empty sequence");
                }
                Value::Seq(s[1..].to_vec())
            }
            (Card, Value::Set(s)) => Value::int(s.len() as i64),
            (Dom, Value::Map(m)) => Value::Set(m.into_keys().collect()),
            (Rng, Value::Map(m)) => Value::Set(m.into_values().collect()),
            (op, v) => return fault(pos, format!("'{}' cannot be applied to {v}", op.symbol())),
        })
    }

    fn apply(&self, root: &Expr, args: &[Expr], env: &Env, pos: Pos) -> R<Value> {
        if let Some(name) = root.as_var() {
            if let Some(Entry::Fun(c)) = env.entry(name) {
                let c = c.clone();
                let vals = self.arguments(args, env)?;
                let defs = c.defs.clone();
                let inner = bind_functions(defs.clone(), &c.env);
                return self.call(&defs[c.index], vals, inner, pos);
            }
            if env.entry(name).is_none() {
                if let Some(f) = self.module.function(name) {
                    let vals = self.arguments(args, env)?;
                    return self.call(f, vals, Env::new(), pos);
                }
                if let Some(v) = self.generated_predicate(name, args, env, pos)? {
                    return Ok(v);
                }
            }
        }
        let f = self.evaluate(root, env)?;
        let vals = self.arguments(args, env)?;
        if vals.len() != 1 {
            return fault(pos, format!("{f} applied to {} arguments", vals.len()));
        }
        let key = vals.into_iter().next().unwrap();
        match f {
            Value::Map(m) => match m.get(&key) {
                Some(v) => Ok(v.clone()),
                None => fault(pos, format!("{key} is not in the map domain")),
            },
            Value::Seq(s) => match seq_index(&key, s.len()) {
                Some(i) => Ok(s[i].clone()),
                None => fault(
                    pos,
                    format!("index {key} out of range for a sequence of length {}", s.len()),
                ),
            },
            other => fault(pos, format!("{other} cannot be applied")),
        }
    }

    fn arguments(&self, args: &[Expr], env: &Env) -> R<Vec<Value>> {
        args.iter().map(|a| self.evaluate(a, env)).collect()
    }

    fn call(&self, f: &FunctionDefinition, args: Vec<Value>, mut env: Env, pos: Pos) -> R<Value> {
        if f.params.len() != args.len() {
            return fault(pos, format!("{} expects {} arguments", f.name, f.params.len()));
        }
        if self.depth.get() >= MAX_CALL_DEPTH {
            return Err(EvalError::Budget("call depth limit".into()));
        }
        for (p, a) in f.params.iter().zip(args) {
            env = env.bind(&p.name, a);
        }
        self.depth.set(self.depth.get() + 1);
        let r = self.evaluate(&f.body, &env);
        self.depth.set(self.depth.get() - 1);
        r
    }

    /// `pre_op`, `pre_f` and `inv_T`.
    fn generated_predicate(&self, name: &str, args: &[Expr], env: &Env, pos: Pos) -> R<Option<Value>> {
        if let Some(t) = name.strip_prefix("inv_") {
            if self.records.contains_key(t) {
                let vals = self.arguments(args, env)?;
                let [v] = vals.as_slice() else {
                    return fault(pos, format!("{name} expects one argument"));
                };
                return Ok(Some(Value::Bool(self.invariant_holds(v, pos)?)));
            }
        }
        let Some(target) = name.strip_prefix("pre_") else {
            return Ok(None);
        };
        if let Some(f) = self.module.function(target) {
            let vals = self.arguments(args, env)?;
            let Some(pre) = &f.pre else {
                return Ok(Some(Value::Bool(true)));
            };
            let env2 = Env::from_pairs(f.params.iter().map(|p| p.name.as_str()).zip(vals));
            return Ok(Some(Value::Bool(self.boolean(pre, &env2)?)));
        }
        if let Some(op) = self.module.operation(target) {
            let vals = self.arguments(args, env)?;
            let Some(pre) = &op.pre else {
                return Ok(Some(Value::Bool(true)));
            };
            let mut env2 = Env::new();
            let mut rest = vals.into_iter();
            for p in &op.params {
                match rest.next() {
                    Some(v) => env2 = env2.bind(&p.name, v),
                    None => return fault(pos, format!("{name} expects more arguments")),
                }
            }
            if let Some(st) = &self.module.state {
                let Some(sv) = rest.next() else {
                    return fault(pos, format!("{name} expects the state as its last argument"));
                };
                env2 = match bind_pattern(&st.record_pattern(), &sv, &env2) {
                    Some(e) => e,
                    None => return fault(pos, format!("{sv} is not a {} state", st.name)),
                };
            }
            return Ok(Some(Value::Bool(self.boolean(pre, &env2)?)));
        }
        Ok(None)
    }

    fn forall(&self, binds: &[Bind], body: &Expr, env: &Env) -> R<Value> {
        let spaces = binds
            .iter()
            .map(|b| space::build(&b.ty, &self.bounds, self).map_err(EvalError::Unsupported))
            .collect::<R<Vec<_>>>()?;
        let mut result = true;
        for_each_case(&spaces, &mut |vals| {
            self.tick()?;
            let mut e = env.clone();
            for (b, v) in binds.iter().zip(vals) {
                if !self.satisfies_invariants(v)? {
                    return Ok(true);
                }
                match bind_pattern(&b.pattern, v, &e) {
                    Some(e2) => e = e2,
                    None => return Ok(true),
                }
            }
            if !self.boolean(body, &e)? {
                result = false;
                return Ok(false);
            }
            Ok(true)
        })?;
        Ok(Value::Bool(result))
    }

    /// Walks obligation context clauses, binding names. Returns `None` when
    /// an implication's antecedent is false (the path is not taken). A
    /// nested quantifier is not supported here.
    pub fn evaluate_context(&self, clauses: &[ContextClause], mut env: Env) -> R<Option<Env>> {
        for c in clauses {
            match c {
                ContextClause::ForAll(_) => {
                    return Err(EvalError::Unsupported("quantifier inside the context".into()));
                }
                ContextClause::PreImplication { pre_name, args } => {
                    let call = Expr::call(pre_name, args.clone(), Pos::default());
                    if !self.boolean(&call, &env)? {
                        return Ok(None);
                    }
                }
                ContextClause::BranchImplication { cond, negated } => {
                    if self.boolean(cond, &env)? == *negated {
                        return Ok(None);
                    }
                }
                ContextClause::LetDef { name, value, .. }
                | ContextClause::LetOldState { name, value }
                | ContextClause::ResultBinding { name, value } => {
                    let v = self.evaluate(value, &env)?;
                    env = env.bind(name, v);
                }
                ContextClause::LetPattern { pattern, value } => {
                    let v = self.evaluate(value, &env)?;
                    env = match bind_pattern(pattern, &v, &env) {
                        Some(e) => e,
                        None => return fault(value.pos, "let pattern does not match"),
                    };
                }
                ContextClause::InlineFunctions { definitions, .. } => {
                    let defs: Vec<FunctionDefinition> = definitions.iter().map(|d| d.def.clone()).collect();
                    env = bind_functions(Rc::new(defs), &env);
                }
            }
        }
        Ok(Some(env))
    }
}

/// Calls `f` on each combination of members, leftmost slowest, until it
/// returns `false`.
pub(crate) fn for_each_case(spaces: &[space::Space], f: &mut dyn FnMut(&[Value]) -> R<bool>) -> R<()> {
    if spaces.iter().any(|s| s.is_empty()) {
        return Ok(());
    }
    let lens: Vec<u128> = spaces.iter().map(|s| s.len()).collect();
    let mut idx = vec![0u128; spaces.len()];
    let mut vals: Vec<Value> = spaces.iter().map(|s| s.get(0)).collect();
    loop {
        if !f(&vals)? {
            return Ok(());
        }
        let mut k = spaces.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lens[k] {
                vals[k] = spaces[k].get(idx[k]);
                break;
            }
            idx[k] = 0;
            vals[k] = spaces[k].get(0);
        }
    }
}

fn bind_functions(defs: Rc<Vec<FunctionDefinition>>, env: &Env) -> Env {
    let mut out = env.clone();
    for (i, d) in defs.iter().enumerate() {
        out = out.push(
            &d.name,
            Entry::Fun(Rc::new(Closure {
                defs: defs.clone(),
                index: i,
                env: env.clone(),
            })),
        );
    }
    out
}

fn seq_index(key: &Value, len: usize) -> Option<usize> {
    let n = key.as_num()?;
    if !n.is_integer() {
        return None;
    }
    let i = n.to_integer().to_usize()?;
    (1..=len).contains(&i).then(|| i - 1)
}

fn override_value(base: Value, with: Value, pos: Pos) -> R<Value> {
    match (base, with) {
        (Value::Map(mut m), Value::Map(w)) => {
            m.extend(w);
            Ok(Value::Map(m))
        }
        (Value::Seq(mut s), Value::Map(w)) => {
            for (k, v) in w {
                match seq_index(&k, s.len()) {
                    Some(i) => s[i] = v,
                    None => return fault(pos, format!("override index {k} out of range")),
                }
            }
            Ok(Value::Seq(s))
        }
        (b, w) => fault(pos, format!("cannot override {b} with {w}")),
    }
}

/// Matches `v` against `p`, extending `env`.
pub fn bind_pattern(p: &Pattern, v: &Value, env: &Env) -> Option<Env> {
    match (p, v) {
        (Pattern::Ident(n), _) => Some(env.bind(n, v.clone())),
        (
            Pattern::Record { name, fields },
            Value::Record {
                name: vn, fields: vf, ..
            },
        ) => {
            if name != vn || fields.len() != vf.len() {
                return None;
            }
            let mut e = env.clone();
            for (p, v) in fields.iter().zip(vf) {
                e = bind_pattern(p, v, &e)?;
            }
            Some(e)
        }
        (Pattern::Tuple(ps), Value::Tuple(vs)) => {
            if ps.len() != vs.len() {
                return None;
            }
            let mut e = env.clone();
            for (p, v) in ps.iter().zip(vs) {
                e = bind_pattern(p, v, &e)?;
            }
            Some(e)
        }
        _ => None,
    }
}

/// Names and values bound by matching `v` against `p`, left to right.
pub fn pattern_assignment(p: &Pattern, v: &Value) -> Option<Vec<(String, Value)>> {
    let env = bind_pattern(p, v, &Env::new())?;
    Some(
        p.names()
            .into_iter()
            .map(|n| {
                let v = env.get(&n).cloned().expect("pattern name bound");
                (n, v)
            })
            .collect(),
    )
}

/// Sets `checked` on every record inside `v`.
pub fn mark_checked(v: Value) -> Value {
    match v {
        Value::Record { name, fields, .. } => Value::Record {
            name,
            fields: fields.into_iter().map(mark_checked).collect(),
            checked: true,
        },
        Value::Seq(xs) => Value::Seq(xs.into_iter().map(mark_checked).collect()),
        Value::Tuple(xs) => Value::Tuple(xs.into_iter().map(mark_checked).collect()),
        Value::Set(xs) => Value::Set(xs.into_iter().map(mark_checked).collect()),
        Value::Map(m) => Value::Map(m.into_iter().map(|(k, v)| (mark_checked(k), mark_checked(v))).collect()),
        other => other,
    }
}

//! Direct imperative execution of operation bodies. Used as an oracle
//! against the let-chains the generator builds.

use indexmap::IndexMap;

use super::eval::{bind_pattern, Env, EvalError, Evaluator};
use super::value::Value;
use crate::ast::{Designator, Expr, OperationDefinition, Pos, Stmt, StmtKind};

/// Iterations a single loop may run before execution gives up.
const MAX_ITERATIONS: u32 = 10_000;

type R<T> = Result<T, EvalError>;

/// Variables visible to the running body.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Store {
    pub vars: IndexMap<String, Value>,
}

impl Store {
    fn env(&self) -> Env {
        Env::from_pairs(self.vars.iter().map(|(k, v)| (k.as_str(), v.clone())))
    }
}

enum Flow {
    Normal,
    Return(Option<Value>),
}

/// Final state (as an unchecked state record) and result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub state: Option<Value>,
    pub result: Option<Value>,
}

enum Step {
    Index(Value),
    Field(usize),
}

impl Evaluator<'_> {
    /// Runs `op` on `args` from `state`. The precondition is not checked.
    pub fn execute(&self, op: &OperationDefinition, args: &[Value], state: Option<&Value>) -> R<Outcome> {
        let mut store = Store::default();
        for (p, a) in op.params.iter().zip(args) {
            store.vars.insert(p.name.clone(), a.clone());
        }
        let st = self.module().state.as_ref();
        if let (Some(st), Some(sv)) = (st, state) {
            let env = bind_pattern(&st.record_pattern(), sv, &Env::new())
                .ok_or_else(|| EvalError::Unsupported(format!("{sv} is not a state value")))?;
            for f in &st.fields {
                store
                    .vars
                    .insert(f.name.clone(), env.get(&f.name).cloned().expect("field bound"));
            }
        }
        let result = match self.exec(&op.body, &mut store)? {
            Flow::Return(v) => v,
            Flow::Normal => None,
        };
        let state = st.map(|st| Value::Record {
            name: st.name.clone(),
            fields: st.fields.iter().map(|f| store.vars[&f.name].clone()).collect(),
            checked: false,
        });
        Ok(Outcome { state, result })
    }

    fn eval_in(&self, e: &Expr, store: &Store) -> R<Value> {
        self.evaluate(e, &store.env())
    }

    fn exec(&self, s: &Stmt, store: &mut Store) -> R<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::Block { dcls, body } => {
                let saved: Vec<(String, Option<Value>)> = dcls
                    .iter()
                    .map(|d| (d.name.clone(), store.vars.get(&d.name).cloned()))
                    .collect();
                for d in dcls {
                    let v = match &d.init {
                        Some(e) => self.eval_in(e, store)?,
                        None => default_value(),
                    };
                    store.vars.insert(d.name.clone(), v);
                }
                let mut flow = Flow::Normal;
                for st in body {
                    flow = self.exec(st, store)?;
                    if matches!(flow, Flow::Return(_)) {
                        break;
                    }
                }
                for (name, old) in saved {
                    match old {
                        Some(v) => {
                            store.vars.insert(name, v);
                        }
                        None => {
                            store.vars.shift_remove(&name);
                        }
                    }
                }
                Ok(flow)
            }
            StmtKind::Assign { target, rhs } => {
                let steps = self.steps(target, store)?;
                let v = self.eval_in(rhs, store)?;
                self.store_at(target, &steps, v, store)?;
                Ok(Flow::Normal)
            }
            StmtKind::Atomic(assigns) => {
                let mut pending = Vec::new();
                for (d, rhs) in assigns {
                    let steps = self.steps(d, store)?;
                    pending.push((d, steps, self.eval_in(rhs, store)?));
                }
                for (d, steps, v) in pending {
                    self.store_at(d, &steps, v, store)?;
                }
                Ok(Flow::Normal)
            }
            StmtKind::If { cond, then, els } => {
                if self.truth(cond, store)? {
                    self.exec(then, store)
                } else if let Some(e) = els {
                    self.exec(e, store)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::Return(e) => Ok(Flow::Return(match e {
                Some(e) => Some(self.eval_in(e, store)?),
                None => None,
            })),
            StmtKind::While { cond, body, .. } => {
                let mut n = 0;
                while self.truth(cond, store)? {
                    n += 1;
                    if n > MAX_ITERATIONS {
                        return Err(EvalError::Budget("loop iteration limit".into()));
                    }
                    if let Flow::Return(v) = self.exec(body, store)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::ForIndex {
                var,
                from,
                to,
                by,
                body,
                ..
            } => {
                let lo = self.integer(from, store)?;
                let hi = self.integer(to, store)?;
                let step = match by {
                    Some(b) => self.integer(b, store)?,
                    None => 1,
                };
                if step == 0 {
                    return Err(EvalError::Fault {
                        pos: s.pos,
                        reason: "for loop step is zero".into(),
                    });
                }
                let saved = store.vars.get(var).cloned();
                let mut i = lo;
                let mut n = 0;
                let mut flow = Flow::Normal;
                while (step > 0 && i <= hi) || (step < 0 && i >= hi) {
                    n += 1;
                    if n > MAX_ITERATIONS {
                        return Err(EvalError::Budget("loop iteration limit".into()));
                    }
                    store.vars.insert(var.clone(), Value::int(i));
                    if let Flow::Return(v) = self.exec(body, store)? {
                        flow = Flow::Return(v);
                        break;
                    }
                    i += step;
                }
                restore(store, var, saved);
                Ok(flow)
            }
            StmtKind::ForSeq { var, seq, body, .. } => {
                let Value::Seq(items) = self.eval_in(seq, store)? else {
                    return Err(EvalError::Fault {
                        pos: seq.pos,
                        reason: "for loop over a non-sequence".into(),
                    });
                };
                let saved = store.vars.get(var).cloned();
                let mut flow = Flow::Normal;
                for it in items {
                    store.vars.insert(var.clone(), it);
                    if let Flow::Return(v) = self.exec(body, store)? {
                        flow = Flow::Return(v);
                        break;
                    }
                }
                restore(store, var, saved);
                Ok(flow)
            }
            StmtKind::Call { callee, .. } => Err(EvalError::Unsupported(format!(
                "call to '{callee}' is not executed by the oracle"
            ))),
        }
    }

    fn truth(&self, e: &Expr, store: &Store) -> R<bool> {
        match self.eval_in(e, store)? {
            Value::Bool(b) => Ok(b),
            v => Err(EvalError::Fault {
                pos: e.pos,
                reason: format!("expected a boolean, found {v}"),
            }),
        }
    }

    fn integer(&self, e: &Expr, store: &Store) -> R<i64> {
        let v = self.eval_in(e, store)?;
        v.as_num()
            .filter(|n| n.is_integer())
            .and_then(|n| num_traits::ToPrimitive::to_i64(&n.to_integer()))
            .ok_or_else(|| EvalError::Fault {
                pos: e.pos,
                reason: format!("expected an integer, found {v}"),
            })
    }

    /// Evaluates the index expressions of a designator, outermost first.
    fn steps(&self, d: &Designator, store: &Store) -> R<Vec<Step>> {
        match d {
            Designator::Name { .. } => Ok(Vec::new()),
            Designator::Index { base, index } => {
                let mut v = self.steps(base, store)?;
                v.push(Step::Index(self.eval_in(index, store)?));
                Ok(v)
            }
            Designator::Field { base, field, pos } => {
                let mut v = self.steps(base, store)?;
                let cur = self.eval_in(&base.to_expr(), store)?;
                let Value::Record { name, .. } = &cur else {
                    return Err(EvalError::Fault {
                        pos: *pos,
                        reason: format!("field '{field}' of non-record {cur}"),
                    });
                };
                let i = self
                    .record_def(name)
                    .and_then(|r| r.field_index(field))
                    .ok_or_else(|| EvalError::Fault {
                        pos: *pos,
                        reason: format!("record {name} has no field '{field}'"),
                    })?;
                v.push(Step::Field(i));
                Ok(v)
            }
        }
    }

    fn store_at(&self, d: &Designator, steps: &[Step], v: Value, store: &mut Store) -> R<()> {
        let root = d.root().to_string();
        let pos = d.pos();
        let new = match steps.is_empty() {
            true => v,
            false => {
                let cur = store
                    .vars
                    .get(&root)
                    .cloned()
                    .ok_or_else(|| EvalError::Unbound(root.clone()))?;
                update(cur, steps, v, pos)?
            }
        };
        store.vars.insert(root, new);
        Ok(())
    }
}

fn update(cur: Value, steps: &[Step], v: Value, pos: Pos) -> R<Value> {
    let Some((first, rest)) = steps.split_first() else {
        return Ok(v);
    };
    let bad = |reason: String| EvalError::Fault { pos, reason };
    match (first, cur) {
        (Step::Index(k), Value::Map(mut m)) => {
            let inner = match rest.is_empty() {
                true => v,
                false => {
                    let old = m
                        .get(k)
                        .cloned()
                        .ok_or_else(|| bad(format!("{k} is not in the map domain")))?;
                    update(old, rest, v, pos)?
                }
            };
            m.insert(k.clone(), inner);
            Ok(Value::Map(m))
        }
        (Step::Index(k), Value::Seq(mut s)) => {
            let i = k
                .as_num()
                .filter(|n| n.is_integer())
                .and_then(|n| num_traits::ToPrimitive::to_usize(&n.to_integer()))
                .filter(|i| (1..=s.len()).contains(i))
                .ok_or_else(|| bad(format!("index {k} out of range")))?;
            let old = std::mem::replace(&mut s[i - 1], Value::Bool(false));
            s[i - 1] = update(old, rest, v, pos)?;
            Ok(Value::Seq(s))
        }
        (Step::Field(i), Value::Record { name, mut fields, .. }) => {
            let old = std::mem::replace(&mut fields[*i], Value::Bool(false));
            fields[*i] = update(old, rest, v, pos)?;
            Ok(Value::Record {
                name,
                fields,
                checked: false,
            })
        }
        (_, other) => Err(bad(format!("cannot update inside {other}"))),
    }
}

fn restore(store: &mut Store, var: &str, saved: Option<Value>) {
    match saved {
        Some(v) => {
            store.vars.insert(var.to_string(), v);
        }
        None => {
            store.vars.shift_remove(var);
        }
    }
}

/// Placeholder for declared but uninitialized locals. Reading one before
/// assignment is a modelling error the oracle does not diagnose.
fn default_value() -> Value {
    Value::Bool(false)
}

use std::collections::HashMap;

use crate::ast::*;

/// How a name came into scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Parameter,
    StateField,
    Dcl,
    LetBound,
    LoopVariable,
    /// The named result (or `RESULT`) inside a postcondition.
    Result,
    Value,
}

impl Origin {
    /// Only state and local variables may be assigned.
    pub fn is_assignable(self) -> bool {
        matches!(self, Origin::StateField | Origin::Dcl)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub name: String,
    pub ty: Type,
    pub origin: Origin,
}

/// Layered name → (type, origin) map. The innermost layer wins.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    layers: Vec<Vec<Binding>>,
}

impl Environment {
    pub fn new() -> Self {
        Environment {
            layers: vec![Vec::new()],
        }
    }

    pub fn push(&mut self) {
        self.layers.push(Vec::new());
    }

    pub fn pop(&mut self) {
        assert!(self.layers.len() > 1, "unbalanced environment pop");
        self.layers.pop();
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn declare(&mut self, name: &str, ty: Type, origin: Origin) {
        self.layers.last_mut().expect("environment has a layer").push(Binding {
            name: name.to_string(),
            ty,
            origin,
        });
    }

    pub fn lookup(&self, name: &str) -> Option<&Binding> {
        self.layers
            .iter()
            .rev()
            .flat_map(|l| l.iter().rev())
            .find(|b| b.name == name)
    }

    pub fn in_current_layer(&self, name: &str) -> bool {
        self.layers.last().is_some_and(|l| l.iter().any(|b| b.name == name))
    }

    /// Declares every name a pattern binds, typed against `ty`.
    pub fn declare_pattern(&mut self, p: &Pattern, ty: &Type, origin: Origin, syms: &Symbols) {
        for (n, t) in pattern_bindings(p, ty, syms) {
            self.declare(&n, t, origin);
        }
    }
}

/// Names bound by a pattern matched against a value of type `ty`.
pub fn pattern_bindings(p: &Pattern, ty: &Type, syms: &Symbols) -> Vec<(String, Type)> {
    let mut out = Vec::new();
    bind(p, ty, syms, &mut out);
    out
}

fn bind(p: &Pattern, ty: &Type, syms: &Symbols, out: &mut Vec<(String, Type)>) {
    match p {
        Pattern::Ident(n) => out.push((n.clone(), ty.clone())),
        Pattern::Record { name, fields } => {
            let rec = syms.record(name);
            for (i, fp) in fields.iter().enumerate() {
                let ft = rec
                    .and_then(|r| r.fields.get(i))
                    .map(|f| f.ty.clone())
                    .unwrap_or(Type::Any);
                bind(fp, &ft, syms, out);
            }
        }
        Pattern::Tuple(ps) => {
            let parts = match syms.normalize(ty) {
                Type::Product(ts) => ts,
                _ => Vec::new(),
            };
            for (i, sp) in ps.iter().enumerate() {
                bind(sp, parts.get(i).unwrap_or(&Type::Any), syms, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSignature {
    pub params: Vec<Type>,
    pub result: Type,
    pub has_pre: bool,
}

/// Module-level names: records, aliases, functions, operations and values.
#[derive(Debug, Clone, Default)]
pub struct Symbols {
    records: HashMap<String, RecordDefinition>,
    aliases: HashMap<String, Type>,
    functions: HashMap<String, FunctionSignature>,
    operations: HashMap<String, FunctionSignature>,
    values: HashMap<String, Type>,
    state: Option<String>,
}

impl Symbols {
    /// Collects declarations. Value types are filled in by the resolver.
    pub fn from_module(m: &ModuleDefinition) -> Self {
        let mut s = Symbols::default();
        if let Some(st) = &m.state {
            s.records.insert(st.name.clone(), st.as_record());
            s.state = Some(st.name.clone());
        }
        for r in &m.types {
            s.records.insert(r.name.clone(), r.clone());
        }
        for a in &m.aliases {
            s.aliases.insert(a.name.clone(), a.ty.clone());
        }
        for f in &m.functions {
            s.functions.insert(
                f.name.clone(),
                FunctionSignature {
                    params: f.params.iter().map(|p| p.ty.clone()).collect(),
                    result: f.result_type.clone(),
                    has_pre: f.pre.is_some(),
                },
            );
        }
        for o in &m.operations {
            s.operations.insert(
                o.name.clone(),
                FunctionSignature {
                    params: o.params.iter().map(|p| p.ty.clone()).collect(),
                    result: o.result_type.clone().unwrap_or(Type::Product(Vec::new())),
                    has_pre: o.pre.is_some(),
                },
            );
        }
        for v in &m.values {
            if let Some(t) = &v.ty {
                s.values.insert(v.name.clone(), t.clone());
            }
        }
        s
    }

    pub fn record(&self, name: &str) -> Option<&RecordDefinition> {
        self.records.get(name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSignature> {
        self.functions.get(name)
    }

    pub fn operation(&self, name: &str) -> Option<&FunctionSignature> {
        self.operations.get(name)
    }

    pub fn value(&self, name: &str) -> Option<&Type> {
        self.values.get(name)
    }

    pub fn set_value_type(&mut self, name: &str, ty: Type) {
        self.values.insert(name.to_string(), ty);
    }

    pub fn state_name(&self) -> Option<&str> {
        self.state.as_deref()
    }

    pub fn is_alias(&self, name: &str) -> bool {
        self.aliases.contains_key(name)
    }

    /// Expands aliases at the top of a type.
    pub fn normalize(&self, t: &Type) -> Type {
        let mut t = t.clone();
        for _ in 0..32 {
            match &t {
                Type::Named(n) if self.aliases.contains_key(n) => t = self.aliases[n].clone(),
                _ => break,
            }
        }
        t
    }
}

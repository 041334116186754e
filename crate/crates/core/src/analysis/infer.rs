use thiserror::Error;

use super::env::{pattern_bindings, Environment, Origin, Symbols};
use crate::ast::*;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct TypeError {
    pub pos: Pos,
    pub message: String,
}

fn err<T>(pos: Pos, message: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError {
        pos,
        message: message.into(),
    })
}

fn rank(t: &Type) -> Option<u8> {
    match t {
        Type::Nat1 => Some(0),
        Type::Nat => Some(1),
        Type::Int => Some(2),
        Type::Real => Some(3),
        _ => None,
    }
}

/// The wider of two numeric types in the tower nat1 < nat < int < real.
pub fn numeric_join(a: &Type, b: &Type) -> Type {
    match (rank(a), rank(b)) {
        (Some(x), Some(y)) => {
            if x >= y {
                a.clone()
            } else {
                b.clone()
            }
        }
        (Some(_), None) => a.clone(),
        _ => b.clone(),
    }
}

/// Least common type for enumeration elements and if-branches.
pub fn join(a: &Type, b: &Type) -> Type {
    match (a, b) {
        (Type::Any, t) | (t, Type::Any) => t.clone(),
        _ if a.is_numeric() && b.is_numeric() => numeric_join(a, b),
        (Type::Seq(x), Type::Seq(y)) => Type::seq(join(x, y)),
        (Type::Set(x), Type::Set(y)) => Type::set(join(x, y)),
        (Type::Map(d1, r1), Type::Map(d2, r2)) => Type::map(join(d1, d2), join(r1, r2)),
        _ => a.clone(),
    }
}

/// Loose assignment compatibility: numerics mix freely (subtype
/// obligations are not generated), `Any` matches everything.
pub fn compatible(a: &Type, b: &Type, syms: &Symbols) -> bool {
    let a = syms.normalize(a);
    let b = syms.normalize(b);
    match (&a, &b) {
        (Type::Any, _) | (_, Type::Any) => true,
        _ if a.is_numeric() && b.is_numeric() => true,
        (Type::Seq(x), Type::Seq(y)) | (Type::Set(x), Type::Set(y)) => compatible(x, y, syms),
        (Type::Map(d1, r1), Type::Map(d2, r2)) => compatible(d1, d2, syms) && compatible(r1, r2, syms),
        (Type::Product(xs), Type::Product(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| compatible(x, y, syms))
        }
        _ => a == b,
    }
}

fn number_type(text: &str) -> Type {
    if text.contains('.') {
        Type::Real
    } else if text.trim_start_matches('0').is_empty() {
        Type::Nat
    } else {
        Type::Nat1
    }
}

fn describe(t: &Type) -> String {
    crate::render::render_type(t)
}

/// Static type of an expression. Also reports unresolved names and
/// operator misuse.
pub fn infer_type(e: &Expr, env: &Environment, syms: &Symbols) -> Result<Type, TypeError> {
    let mut env = env.clone();
    infer(e, &mut env, syms)
}

fn expect_numeric(t: &Type, pos: Pos, what: &str) -> Result<(), TypeError> {
    if t.is_numeric() || *t == Type::Any {
        Ok(())
    } else {
        err(pos, format!("{what} expects a numeric operand, found {}", describe(t)))
    }
}

fn expect_bool(t: &Type, pos: Pos, what: &str) -> Result<(), TypeError> {
    if matches!(t, Type::Bool | Type::Any) {
        Ok(())
    } else {
        err(pos, format!("{what} expects a boolean operand, found {}", describe(t)))
    }
}

fn infer(e: &Expr, env: &mut Environment, syms: &Symbols) -> Result<Type, TypeError> {
    let n = |t: &Type| syms.normalize(t);
    match &e.kind {
        ExprKind::Number(s) => Ok(number_type(s)),
        ExprKind::Bool(_) => Ok(Type::Bool),
        ExprKind::Var(v) => lookup_var(v, e.pos, env, syms),
        ExprKind::Old(v) => match env.lookup(v) {
            Some(b) if b.origin == Origin::StateField => Ok(b.ty.clone()),
            _ => err(e.pos, format!("'{v}~' does not name a state variable")),
        },
        ExprKind::Binary { op, lhs, rhs } => {
            let l = n(&infer(lhs, env, syms)?);
            let r = n(&infer(rhs, env, syms)?);
            binary_type(*op, &l, &r, e.pos, syms)
        }
        ExprKind::Unary { op, operand } => {
            let t = n(&infer(operand, env, syms)?);
            unary_type(*op, &t, e.pos)
        }
        ExprKind::Apply { root, args } => {
            if let ExprKind::Var(name) = &root.kind {
                if env.lookup(name).is_none() && syms.value(name).is_none() {
                    return apply_named(name, args, e.pos, env, syms);
                }
            }
            let rt = n(&infer(root, env, syms)?);
            let arg_types = args
                .iter()
                .map(|a| infer(a, env, syms))
                .collect::<Result<Vec<_>, _>>()?;
            match rt {
                Type::Map(_, r) if args.len() == 1 => Ok(*r),
                Type::Seq(el) if args.len() == 1 => {
                    expect_numeric(&arg_types[0], args[0].pos, "sequence index")?;
                    Ok(*el)
                }
                Type::Any => Ok(Type::Any),
                other => err(e.pos, format!("cannot apply a value of type {}", describe(&other))),
            }
        }
        ExprKind::Field { record, field } => {
            let rt = n(&infer(record, env, syms)?);
            match &rt {
                Type::Named(r) => match syms.record(r) {
                    Some(def) => match def.field(field) {
                        Some(f) => Ok(f.ty.clone()),
                        None => err(e.pos, format!("record {r} has no field '{field}'")),
                    },
                    None => err(e.pos, format!("unknown record type {r}")),
                },
                Type::Any => Ok(Type::Any),
                other => err(
                    e.pos,
                    format!("field '{field}' selected from non-record type {}", describe(other)),
                ),
            }
        }
        ExprKind::MkRecord { name, args, .. } => {
            let def = match syms.record(name) {
                Some(d) => d.clone(),
                None => return err(e.pos, format!("unknown record type {name}")),
            };
            if def.fields.len() != args.len() {
                return err(
                    e.pos,
                    format!("mk_{name} expects {} arguments, found {}", def.fields.len(), args.len()),
                );
            }
            for (a, f) in args.iter().zip(&def.fields) {
                let t = infer(a, env, syms)?;
                if !compatible(&t, &f.ty, syms) {
                    return err(
                        a.pos,
                        format!(
                            "field '{}' of {name} expects {}, found {}",
                            f.name,
                            describe(&f.ty),
                            describe(&t)
                        ),
                    );
                }
            }
            Ok(Type::Named(name.clone()))
        }
        ExprKind::MkTuple(args) => Ok(Type::Product(
            args.iter().map(|a| infer(a, env, syms)).collect::<Result<_, _>>()?,
        )),
        ExprKind::Mu { record, updates } => {
            let rt = n(&infer(record, env, syms)?);
            let name = match &rt {
                Type::Named(r) => r.clone(),
                Type::Any => return Ok(Type::Any),
                other => return err(e.pos, format!("mu applied to non-record type {}", describe(other))),
            };
            let def = syms.record(&name).cloned().ok_or_else(|| TypeError {
                pos: e.pos,
                message: format!("unknown record type {name}"),
            })?;
            for (f, v) in updates {
                let ft = match def.field(f) {
                    Some(fd) => fd.ty.clone(),
                    None => return err(e.pos, format!("record {name} has no field '{f}'")),
                };
                let vt = infer(v, env, syms)?;
                if !compatible(&vt, &ft, syms) {
                    return err(
                        v.pos,
                        format!("field '{f}' expects {}, found {}", describe(&ft), describe(&vt)),
                    );
                }
            }
            Ok(rt)
        }
        ExprKind::Override { base, with } => {
            let b = n(&infer(base, env, syms)?);
            let w = n(&infer(with, env, syms)?);
            match (&b, &w) {
                (Type::Map(..), Type::Map(..)) => Ok(join(&b, &w)),
                (Type::Seq(el), Type::Map(d, r)) => {
                    expect_numeric(d, with.pos, "sequence override index")?;
                    if !compatible(el, r, syms) {
                        return err(e.pos, "sequence override value does not match the element type");
                    }
                    Ok(b.clone())
                }
                (Type::Any, _) => Ok(w.clone()),
                (_, Type::Any) => Ok(b.clone()),
                _ => err(
                    e.pos,
                    format!("'++' cannot combine {} and {}", describe(&b), describe(&w)),
                ),
            }
        }
        ExprKind::SetEnum(es) => {
            let mut t = Type::Any;
            for x in es {
                t = join(&t, &infer(x, env, syms)?);
            }
            Ok(Type::set(t))
        }
        ExprKind::SeqEnum(es) => {
            let mut t = Type::Any;
            for x in es {
                t = join(&t, &infer(x, env, syms)?);
            }
            Ok(Type::seq(t))
        }
        ExprKind::MapEnum(ms) => {
            let mut d = Type::Any;
            let mut r = Type::Any;
            for (k, v) in ms {
                d = join(&d, &infer(k, env, syms)?);
                r = join(&r, &infer(v, env, syms)?);
            }
            Ok(Type::map(d, r))
        }
        ExprKind::Let {
            pattern,
            ty,
            value,
            body,
        } => {
            let vt = infer(value, env, syms)?;
            let bound = match ty {
                Some(t) => {
                    if !compatible(&vt, t, syms) {
                        return err(
                            value.pos,
                            format!("let value of type {} does not match {}", describe(&vt), describe(t)),
                        );
                    }
                    t.clone()
                }
                None => vt,
            };
            check_pattern(pattern, &bound, e.pos, syms)?;
            env.push();
            env.declare_pattern(pattern, &bound, Origin::LetBound, syms);
            let r = infer(body, env, syms);
            env.pop();
            r
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
                let r = infer(&d.body, env, syms);
                env.pop();
                r?;
            }
            let r = infer(body, env, syms);
            env.pop();
            r
        }
        ExprKind::Forall { binds, body } => {
            env.push();
            for b in binds {
                check_pattern(&b.pattern, &b.ty, e.pos, syms)?;
                env.declare_pattern(&b.pattern, &b.ty, Origin::LetBound, syms);
            }
            let t = infer(body, env, syms);
            env.pop();
            expect_bool(&n(&t?), body.pos, "forall")?;
            Ok(Type::Bool)
        }
        ExprKind::If { cond, then, els } => {
            let c = n(&infer(cond, env, syms)?);
            expect_bool(&c, cond.pos, "if")?;
            let a = infer(then, env, syms)?;
            let b = infer(els, env, syms)?;
            Ok(join(&a, &b))
        }
    }
}

fn check_pattern(p: &Pattern, ty: &Type, pos: Pos, syms: &Symbols) -> Result<(), TypeError> {
    match p {
        Pattern::Ident(_) => Ok(()),
        Pattern::Record { name, fields } => {
            let def = syms.record(name).ok_or_else(|| TypeError {
                pos,
                message: format!("unknown record type {name} in pattern"),
            })?;
            if def.fields.len() != fields.len() {
                return err(
                    pos,
                    format!(
                        "pattern mk_{name} needs {} fields, found {}",
                        def.fields.len(),
                        fields.len()
                    ),
                );
            }
            for (fp, f) in fields.iter().zip(&def.fields) {
                check_pattern(fp, &f.ty, pos, syms)?;
            }
            Ok(())
        }
        Pattern::Tuple(ps) => {
            if let Type::Product(ts) = syms.normalize(ty) {
                if ts.len() != ps.len() {
                    return err(pos, "tuple pattern arity does not match");
                }
            }
            let _ = pattern_bindings(p, ty, syms);
            Ok(())
        }
    }
}

fn lookup_var(v: &str, pos: Pos, env: &Environment, syms: &Symbols) -> Result<Type, TypeError> {
    if let Some(b) = env.lookup(v) {
        return Ok(b.ty.clone());
    }
    if let Some(t) = syms.value(v) {
        return Ok(t.clone());
    }
    if syms.function(v).is_some() || syms.operation(v).is_some() {
        return err(pos, format!("'{v}' must be applied to arguments"));
    }
    err(pos, format!("unresolved identifier '{v}'"))
}

fn apply_named(name: &str, args: &[Expr], pos: Pos, env: &mut Environment, syms: &Symbols) -> Result<Type, TypeError> {
    let arg_types = args
        .iter()
        .map(|a| infer(a, env, syms))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(sig) = syms.function(name) {
        if sig.params.len() != args.len() {
            return err(
                pos,
                format!("{name} expects {} arguments, found {}", sig.params.len(), args.len()),
            );
        }
        for ((a, t), want) in args.iter().zip(&arg_types).zip(&sig.params) {
            if !compatible(t, want, syms) {
                return err(
                    a.pos,
                    format!("argument of {name} expects {}, found {}", describe(want), describe(t)),
                );
            }
        }
        return Ok(sig.result.clone());
    }
    if syms.operation(name).is_some() {
        return err(
            pos,
            format!(
                "operation '{name}' may only be called as a statement or as the whole right-hand side of an assignment"
            ),
        );
    }
    if let Some(base) = name.strip_prefix("pre_") {
        let expected = syms.function(base).map(|s| s.params.len()).or_else(|| {
            syms.operation(base)
                .map(|s| s.params.len() + usize::from(syms.state_name().is_some()))
        });
        return match expected {
            Some(k) if k == args.len() => Ok(Type::Bool),
            Some(k) => err(pos, format!("{name} expects {k} arguments, found {}", args.len())),
            None => err(pos, format!("unresolved identifier '{name}'")),
        };
    }
    if let Some(base) = name.strip_prefix("inv_") {
        if syms.record(base).is_some() && args.len() == 1 {
            return Ok(Type::Bool);
        }
    }
    err(pos, format!("unresolved identifier '{name}'"))
}

fn binary_type(op: BinaryOp, l: &Type, r: &Type, pos: Pos, syms: &Symbols) -> Result<Type, TypeError> {
    use BinaryOp::*;
    let sym = op.symbol();
    match op {
        Add | Mul => {
            expect_numeric(l, pos, sym)?;
            expect_numeric(r, pos, sym)?;
            Ok(numeric_join(l, r))
        }
        Sub => {
            expect_numeric(l, pos, sym)?;
            expect_numeric(r, pos, sym)?;
            Ok(if *l == Type::Real || *r == Type::Real {
                Type::Real
            } else {
                Type::Int
            })
        }
        Div => {
            expect_numeric(l, pos, sym)?;
            expect_numeric(r, pos, sym)?;
            Ok(Type::Real)
        }
        IntDiv | Mod | Rem => {
            expect_numeric(l, pos, sym)?;
            expect_numeric(r, pos, sym)?;
            let natural = |t: &Type| matches!(t, Type::Nat | Type::Nat1);
            Ok(if natural(l) && natural(r) { Type::Nat } else { Type::Int })
        }
        Lt | Gt | Le | Ge => {
            expect_numeric(l, pos, sym)?;
            expect_numeric(r, pos, sym)?;
            Ok(Type::Bool)
        }
        Eq | Ne => {
            if !compatible(l, r, syms) {
                return err(pos, format!("'{sym}' compares {} with {}", describe(l), describe(r)));
            }
            Ok(Type::Bool)
        }
        And | Or | Implies | Iff => {
            expect_bool(l, pos, sym)?;
            expect_bool(r, pos, sym)?;
            Ok(Type::Bool)
        }
        InSet | NotInSet => match r {
            Type::Set(_) | Type::Any => Ok(Type::Bool),
            other => err(pos, format!("'{sym}' expects a set, found {}", describe(other))),
        },
        Subset => match (l, r) {
            (Type::Set(_) | Type::Any, Type::Set(_) | Type::Any) => Ok(Type::Bool),
            _ => err(pos, "'subset' expects sets"),
        },
        Union | Inter | Difference => match (l, r) {
            (Type::Set(_) | Type::Any, Type::Set(_) | Type::Any) => Ok(join(l, r)),
            _ => err(
                pos,
                format!("'{sym}' expects sets, found {} and {}", describe(l), describe(r)),
            ),
        },
        Concat => match (l, r) {
            (Type::Seq(_) | Type::Any, Type::Seq(_) | Type::Any) => Ok(join(l, r)),
            _ => err(
                pos,
                format!("'^' expects sequences, found {} and {}", describe(l), describe(r)),
            ),
        },
    }
}

fn unary_type(op: UnaryOp, t: &Type, pos: Pos) -> Result<Type, TypeError> {
    use UnaryOp::*;
    let sym = op.symbol();
    let any = *t == Type::Any;
    match op {
        Not => {
            expect_bool(t, pos, "not")?;
            Ok(Type::Bool)
        }
        Neg => {
            expect_numeric(t, pos, "-")?;
            Ok(if *t == Type::Real { Type::Real } else { Type::Int })
        }
        Plus => {
            expect_numeric(t, pos, "+")?;
            Ok(t.clone())
        }
        Abs => {
            expect_numeric(t, pos, "abs")?;
            Ok(if *t == Type::Real { Type::Real } else { Type::Nat })
        }
        Floor => {
            expect_numeric(t, pos, "floor")?;
            Ok(Type::Int)
        }
        Len => match t {
            Type::Seq(_) => Ok(Type::Nat),
            _ if any => Ok(Type::Nat),
            _ => err(pos, format!("'{sym}' expects a sequence, found {}", describe(t))),
        },
        Hd => match t {
            Type::Seq(e) => Ok((**e).clone()),
            _ if any => Ok(Type::Any),
            _ => err(pos, format!("'{sym}' expects a sequence, found {}", describe(t))),
        },
        Tl => match t {
            Type::Seq(_) => Ok(t.clone()),
            _ if any => Ok(Type::Any),
            _ => err(pos, format!("'{sym}' expects a sequence, found {}", describe(t))),
        },
        Inds => match t {
            Type::Seq(_) => Ok(Type::set(Type::Nat1)),
            _ if any => Ok(Type::set(Type::Nat1)),
            _ => err(pos, format!("'{sym}' expects a sequence, found {}", describe(t))),
        },
        Elems => match t {
            Type::Seq(e) => Ok(Type::Set(e.clone())),
            _ if any => Ok(Type::set(Type::Any)),
            _ => err(pos, format!("'{sym}' expects a sequence, found {}", describe(t))),
        },
        Card => match t {
            Type::Set(_) => Ok(Type::Nat),
            _ if any => Ok(Type::Nat),
            _ => err(pos, format!("'{sym}' expects a set, found {}", describe(t))),
        },
        Dom => match t {
            Type::Map(d, _) => Ok(Type::Set(d.clone())),
            _ if any => Ok(Type::set(Type::Any)),
            _ => err(pos, format!("'{sym}' expects a map, found {}", describe(t))),
        },
        Rng => match t {
            Type::Map(_, r) => Ok(Type::Set(r.clone())),
            _ if any => Ok(Type::set(Type::Any)),
            _ => err(pos, format!("'{sym}' expects a map, found {}", describe(t))),
        },
    }
}

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A runtime value. Numbers are exact rationals.
#[derive(Debug, Clone)]
pub enum Value {
    Num(BigRational),
    Bool(bool),
    Seq(Vec<Value>),
    Set(BTreeSet<Value>),
    Map(BTreeMap<Value, Value>),
    /// `checked` is false for records built with `mk_T!` or not yet
    /// tested against their invariant. It does not take part in equality.
    Record {
        name: String,
        fields: Vec<Value>,
        checked: bool,
    },
    Tuple(Vec<Value>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(p: i64, q: i64) -> Value {
        Value::Num(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn record(name: &str, fields: Vec<Value>) -> Value {
        Value::Record {
            name: name.to_string(),
            fields,
            checked: true,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Value::Num(n) => Some(n),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Num(_) => 0,
            Value::Bool(_) => 1,
            Value::Seq(_) => 2,
            Value::Set(_) => 3,
            Value::Map(_) => 4,
            Value::Record { .. } => 5,
            Value::Tuple(_) => 6,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Seq(a), Value::Seq(b)) | (Value::Tuple(a), Value::Tuple(b)) => a.cmp(b),
            (Value::Set(a), Value::Set(b)) => a.cmp(b),
            (Value::Map(a), Value::Map(b)) => a.cmp(b),
            (
                Value::Record {
                    name: n1, fields: f1, ..
                },
                Value::Record {
                    name: n2, fields: f2, ..
                },
            ) => n1.cmp(n2).then_with(|| f1.cmp(f2)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, items: impl Iterator<Item = String>) -> fmt::Result {
    let v: Vec<String> = items.collect();
    f.write_str(&v.join(", "))
}

/// VDM-SL literal syntax, so a printed value reads back as an expression.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => {
                if n.denom().is_one() {
                    write!(f, "{}", n.numer())
                } else if n.is_negative() {
                    write!(f, "-{}/{}", -n.numer(), n.denom())
                } else {
                    write!(f, "{}/{}", n.numer(), n.denom())
                }
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::Seq(items) => {
                f.write_str("[")?;
                join(f, items.iter().map(|v| v.to_string()))?;
                f.write_str("]")
            }
            Value::Set(items) => {
                f.write_str("{")?;
                join(f, items.iter().map(|v| v.to_string()))?;
                f.write_str("}")
            }
            Value::Map(m) => {
                if m.is_empty() {
                    return f.write_str("{|->}");
                }
                f.write_str("{")?;
                join(f, m.iter().map(|(k, v)| format!("{k} |-> {v}")))?;
                f.write_str("}")
            }
            Value::Record { name, fields, .. } => {
                write!(f, "mk_{name}(")?;
                join(f, fields.iter().map(|v| v.to_string()))?;
                f.write_str(")")
            }
            Value::Tuple(items) => {
                f.write_str("mk_(")?;
                join(f, items.iter().map(|v| v.to_string()))?;
                f.write_str(")")
            }
        }
    }
}

pub fn is_integer(n: &BigRational) -> bool {
    n.denom().is_one()
}

pub fn is_zero(n: &BigRational) -> bool {
    n.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_ignores_checked_flag() {
        let a = Value::record("R", vec![Value::int(1)]);
        let b = Value::Record {
            name: "R".into(),
            fields: vec![Value::int(1)],
            checked: false,
        };
        assert_eq!(a, b);
    }

    #[test]
    fn display_is_vdm_syntax() {
        let m: BTreeMap<Value, Value> = [(Value::int(1), Value::ratio(-1, 2))].into_iter().collect();
        assert_eq!(Value::Map(m).to_string(), "{1 |-> -1/2}");
        assert_eq!(Value::Map(BTreeMap::new()).to_string(), "{|->}");
        assert_eq!(
            Value::Tuple(vec![Value::Bool(true), Value::Seq(vec![])]).to_string(),
            "mk_(true, [])"
        );
    }
}

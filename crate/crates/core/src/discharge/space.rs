//! Finite, indexable value spaces for bounded enumeration.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::eval::{mark_checked, Evaluator};
use super::value::Value;
use super::Bounds;
use crate::ast::Type;

/// Records with invariants are filtered eagerly when their raw space has
/// at most this many members; larger ones are filtered per case.
const FILTER_LIMIT: u128 = 50_000;

#[derive(Debug, Clone)]
pub enum Maker {
    Tuple,
    Record { name: String, checked: bool },
}

/// An ordered set of values addressed by index.
#[derive(Debug, Clone)]
pub enum Space {
    List(Vec<Value>),
    Seq {
        elem: Box<Space>,
        max_len: usize,
    },
    Set {
        elem: Box<Space>,
        max_size: usize,
    },
    Map {
        dom: Box<Space>,
        rng: Box<Space>,
        max_size: usize,
    },
    Product {
        parts: Vec<Space>,
        maker: Maker,
    },
}

fn pow(n: u128, k: usize) -> u128 {
    let mut r: u128 = 1;
    for _ in 0..k {
        r = r.saturating_mul(n);
    }
    r
}

fn choose(n: u128, k: usize) -> u128 {
    let k = k as u128;
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// The `r`th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: u128, k: usize, mut r: u128) -> Vec<u128> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0u128;
    for slot in 0..k {
        let remaining = k - slot;
        let mut c = next;
        loop {
            let with_c = choose(n - c - 1, remaining - 1);
            if r < with_c {
                break;
            }
            r -= with_c;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

impl Space {
    pub fn len(&self) -> u128 {
        match self {
            Space::List(v) => v.len() as u128,
            Space::Seq { elem, max_len } => {
                let n = elem.len();
                (0..=*max_len).fold(0u128, |acc, k| acc.saturating_add(pow(n, k)))
            }
            Space::Set { elem, max_size } => {
                let n = elem.len();
                (0..=*max_size).fold(0u128, |acc, k| acc.saturating_add(choose(n, k)))
            }
            Space::Map { dom, rng, max_size } => {
                let (n, m) = (dom.len(), rng.len());
                (0..=*max_size).fold(0u128, |acc, k| {
                    acc.saturating_add(choose(n, k).saturating_mul(pow(m, k)))
                })
            }
            Space::Product { parts, .. } => parts.iter().fold(1u128, |acc, p| acc.saturating_mul(p.len())),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Member `i`, for `i < self.len()`.
    pub fn get(&self, mut i: u128) -> Value {
        match self {
            Space::List(v) => v[i as usize].clone(),
            Space::Seq { elem, max_len } => {
                let n = elem.len();
                for k in 0..=*max_len {
                    let block = pow(n, k);
                    if i < block {
                        let mut digits = vec![0u128; k];
                        for d in digits.iter_mut().rev() {
                            *d = i % n;
                            i /= n;
                        }
                        return Value::Seq(digits.into_iter().map(|d| elem.get(d)).collect());
                    }
                    i -= block;
                }
                unreachable!("sequence index out of range")
            }
            Space::Set { elem, max_size } => {
                let n = elem.len();
                for k in 0..=*max_size {
                    let block = choose(n, k);
                    if i < block {
                        return Value::Set(unrank_combination(n, k, i).into_iter().map(|d| elem.get(d)).collect());
                    }
                    i -= block;
                }
                unreachable!("set index out of range")
            }
            Space::Map { dom, rng, max_size } => {
                let (n, m) = (dom.len(), rng.len());
                for k in 0..=*max_size {
                    let per_domain = pow(m, k);
                    let block = choose(n, k).saturating_mul(per_domain);
                    if i < block {
                        let keys = unrank_combination(n, k, i / per_domain);
                        let mut r = i % per_domain;
                        let mut vals = vec![0u128; k];
                        for d in vals.iter_mut().rev() {
                            *d = r % m;
                            r /= m;
                        }
                        return Value::Map(
                            keys.into_iter()
                                .zip(vals)
                                .map(|(a, b)| (dom.get(a), rng.get(b)))
                                .collect(),
                        );
                    }
                    i -= block;
                }
                unreachable!("map index out of range")
            }
            Space::Product { parts, maker } => {
                let mut idx = vec![0u128; parts.len()];
                for (slot, p) in idx.iter_mut().zip(parts).rev() {
                    let n = p.len();
                    *slot = i % n;
                    i /= n;
                }
                let vals: Vec<Value> = idx.into_iter().zip(parts).map(|(j, p)| p.get(j)).collect();
                match maker {
                    Maker::Tuple => Value::Tuple(vals),
                    Maker::Record { name, checked } => Value::Record {
                        name: name.clone(),
                        fields: vals,
                        checked: *checked,
                    },
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

fn ints(lo: i64, hi: i64) -> Vec<Value> {
    (lo..=hi).map(Value::int).collect()
}

fn reals(b: &Bounds) -> Vec<Value> {
    let mut out: Vec<BigRational> = Vec::new();
    for q in 1..=3i64 {
        for p in -b.int_max.abs()..=b.int_max.abs() {
            out.push(BigRational::new(BigInt::from(p), BigInt::from(q)));
        }
    }
    out.sort();
    out.dedup();
    out.into_iter().map(Value::Num).collect()
}

/// The space of values of `t` within the bounds.
pub fn build(t: &Type, b: &Bounds, ev: &Evaluator) -> Result<Space, String> {
    Ok(match t {
        Type::Nat => Space::List(ints(0, b.nat_max)),
        Type::Nat1 => Space::List(ints(1, b.nat_max)),
        Type::Int => Space::List(ints(b.int_min, b.int_max)),
        Type::Real => Space::List(reals(b)),
        Type::Bool => Space::List(vec![Value::Bool(false), Value::Bool(true)]),
        Type::Seq(e) => Space::Seq {
            elem: Box::new(build(e, b, ev)?),
            max_len: b.seq_len_max,
        },
        Type::Set(e) => Space::Set {
            elem: Box::new(build(e, b, ev)?),
            max_size: b.set_size_max,
        },
        Type::Map(d, r) => Space::Map {
            dom: Box::new(build(d, b, ev)?),
            rng: Box::new(build(r, b, ev)?),
            max_size: b.map_size_max,
        },
        Type::Product(ts) => Space::Product {
            parts: ts.iter().map(|t| build(t, b, ev)).collect::<Result<_, _>>()?,
            maker: Maker::Tuple,
        },
        Type::Named(n) => {
            if let Some(alias) = ev.alias(n) {
                return build(alias, b, ev);
            }
            let rec = ev.record_def(n).ok_or_else(|| format!("unknown type '{n}'"))?.clone();
            let parts = rec
                .fields
                .iter()
                .map(|f| build(&f.ty, b, ev))
                .collect::<Result<Vec<_>, _>>()?;
            let has_inv = rec.invariant.is_some();
            let raw = Space::Product {
                parts,
                maker: Maker::Record {
                    name: n.clone(),
                    checked: !has_inv,
                },
            };
            if has_inv && raw.len() <= FILTER_LIMIT {
                let mut kept = Vec::new();
                for v in raw.iter() {
                    if ev.satisfies_invariants(&v).map_err(|e| e.to_string())? {
                        kept.push(mark_checked(v));
                    }
                }
                Space::List(kept)
            } else {
                raw
            }
        }
        Type::Any => return Err("cannot enumerate values of an unknown type".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_in_order() {
        let all: Vec<Vec<u128>> = (0..choose(4, 2)).map(|r| unrank_combination(4, 2, r)).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn sizes() {
        let nat = Space::List(ints(0, 2));
        let seq = Space::Seq {
            elem: Box::new(nat.clone()),
            max_len: 2,
        };
        assert_eq!(seq.len(), 1 + 3 + 9);
        let set = Space::Set {
            elem: Box::new(nat.clone()),
            max_size: 3,
        };
        assert_eq!(set.len(), 8);
        let map = Space::Map {
            dom: Box::new(nat.clone()),
            rng: Box::new(nat),
            max_size: 1,
        };
        assert_eq!(map.len(), 1 + 9);
    }
}

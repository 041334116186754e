//! Generator-wide invariants checked over random inputs.

mod common;

use proptest::prelude::*;

use vdm_pog::ast::{
    BinaryOp, Bind, ContextClause, Expr, ExprKind, ObligationKind, ObligationStatus, Pattern, Pos, Type, UnaryOp,
};
use vdm_pog::discharge::{enumerate_values, pattern_assignment, Bounds, Env, Evaluator, Value};
use vdm_pog::driver::generate_source;
use vdm_pog::frontend::{parse_expression, Dialect};
use vdm_pog::pog::PogOptions;
use vdm_pog::render::{render_expression, render_expression_with, ExprStyle};

const BINARY: [BinaryOp; 24] = [
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::IntDiv,
    BinaryOp::Mod,
    BinaryOp::Rem,
    BinaryOp::Eq,
    BinaryOp::Ne,
    BinaryOp::Lt,
    BinaryOp::Gt,
    BinaryOp::Le,
    BinaryOp::Ge,
    BinaryOp::And,
    BinaryOp::Or,
    BinaryOp::Implies,
    BinaryOp::Iff,
    BinaryOp::InSet,
    BinaryOp::NotInSet,
    BinaryOp::Subset,
    BinaryOp::Union,
    BinaryOp::Inter,
    BinaryOp::Difference,
    BinaryOp::Concat,
];

const UNARY: [UnaryOp; 13] = [
    UnaryOp::Not,
    UnaryOp::Neg,
    UnaryOp::Plus,
    UnaryOp::Len,
    UnaryOp::Dom,
    UnaryOp::Rng,
    UnaryOp::Hd,
    UnaryOp::Tl,
    UnaryOp::Inds,
    UnaryOp::Elems,
    UnaryOp::Card,
    UnaryOp::Abs,
    UnaryOp::Floor,
];

fn p() -> Pos {
    Pos::default()
}

fn name() -> impl Strategy<Value = String> + Clone {
    prop::sample::select(vec!["a", "b", "sv", "xv", "count", "sv$", "$atomic1"]).prop_map(String::from)
}

fn field_name() -> impl Strategy<Value = String> + Clone {
    prop::sample::select(vec!["size", "f", "q"]).prop_map(String::from)
}

fn ty() -> impl Strategy<Value = Type> + Clone {
    let leaf = prop::sample::select(vec![
        Type::Nat,
        Type::Nat1,
        Type::Int,
        Type::Real,
        Type::Bool,
        Type::Named("R".into()),
    ]);
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Type::seq),
            inner.clone().prop_map(Type::set),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::map(a, b)),
            prop::collection::vec(inner, 2..=3).prop_map(Type::Product),
        ]
    })
}

fn pattern() -> impl Strategy<Value = Pattern> + Clone {
    let ident = name().prop_map(Pattern::Ident);
    prop_oneof![
        3 => ident.clone(),
        1 => prop::collection::vec(ident.clone(), 1..=2).prop_map(|fields| Pattern::Record { name: "R".into(), fields }),
        1 => prop::collection::vec(ident, 2..=3).prop_map(Pattern::Tuple),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Expr::number(&n.to_string(), p())),
        (0u32..100, 0u32..100).prop_map(|(a, b)| Expr::number(&format!("{a}.{b}"), p())),
        any::<bool>().prop_map(|b| Expr::new(ExprKind::Bool(b), p())),
        name().prop_map(|n| Expr::var(&n, p())),
        prop::sample::select(vec!["sv", "xv"]).prop_map(|n| Expr::new(ExprKind::Old(n.into()), p())),
    ];
    leaf.prop_recursive(4, 48, 4, |inner| {
        let e = inner.clone();
        let b = |x: Expr| Box::new(x);
        prop_oneof![
            (prop::sample::select(BINARY.to_vec()), e.clone(), e.clone()).prop_map(|(op, l, r)| Expr::binary(
                op,
                l,
                r,
                p()
            )),
            (prop::sample::select(UNARY.to_vec()), e.clone()).prop_map(|(op, x)| Expr::unary(op, x, p())),
            (name(), prop::collection::vec(e.clone(), 1..=3)).prop_map(|(f, args)| Expr::apply(
                Expr::var(&f, p()),
                args,
                p()
            )),
            (e.clone(), field_name())
                .prop_map(move |(r, field)| Expr::new(ExprKind::Field { record: b(r), field }, p())),
            (any::<bool>(), prop::collection::vec(e.clone(), 0..=3)).prop_map(|(maximal, args)| Expr::new(
                ExprKind::MkRecord {
                    name: "R".into(),
                    maximal,
                    args
                },
                p()
            )),
            prop::collection::vec(e.clone(), 2..=3).prop_map(|xs| Expr::new(ExprKind::MkTuple(xs), p())),
            (e.clone(), prop::collection::vec((field_name(), e.clone()), 1..=2))
                .prop_map(move |(r, updates)| { Expr::new(ExprKind::Mu { record: b(r), updates }, p()) }),
            (e.clone(), e.clone())
                .prop_map(move |(x, w)| Expr::new(ExprKind::Override { base: b(x), with: b(w) }, p())),
            prop::collection::vec(e.clone(), 0..=3).prop_map(|xs| Expr::new(ExprKind::SetEnum(xs), p())),
            prop::collection::vec(e.clone(), 0..=3).prop_map(|xs| Expr::new(ExprKind::SeqEnum(xs), p())),
            prop::collection::vec((e.clone(), e.clone()), 0..=2).prop_map(|xs| Expr::new(ExprKind::MapEnum(xs), p())),
            (pattern(), prop::option::of(ty()), e.clone(), e.clone()).prop_map(|(pat, t, v, body)| {
                // A typed let only binds a plain name.
                let t = if matches!(pat, Pattern::Ident(_)) { t } else { None };
                Expr::let_in(pat, t, v, body)
            }),
            (prop::collection::vec((pattern(), ty()), 1..=2), e.clone()).prop_map(move |(bs, body)| Expr::new(
                ExprKind::Forall {
                    binds: bs.into_iter().map(|(pattern, ty)| Bind { pattern, ty }).collect(),
                    body: b(body),
                },
                p()
            )),
            (e.clone(), e.clone(), e).prop_map(move |(c, t, f)| Expr::new(
                ExprKind::If {
                    cond: b(c),
                    then: b(t),
                    els: b(f)
                },
                p()
            )),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn full_rendering_reparses_to_the_same_tree(e in expr()) {
        let text = render_expression(&e);
        let back = parse_expression(&text, Dialect::Obligation);
        prop_assert!(back.is_ok(), "{text}: {:?}", back.err());
        prop_assert_eq!(back.unwrap(), e, "{}", text);
    }

    #[test]
    fn minimal_rendering_reparses_to_the_same_tree(e in expr()) {
        let text = render_expression_with(&e, ExprStyle::Minimal);
        let back = parse_expression(&text, Dialect::Obligation);
        prop_assert!(back.is_ok(), "{text}: {:?}", back.err());
        prop_assert_eq!(back.unwrap(), e, "{}", text);
    }
}

/// Names an obligation may mention without binding them.
fn module_names(m: &vdm_pog::ast::ModuleDefinition) -> Vec<String> {
    let mut out: Vec<String> = m.functions.iter().map(|f| f.name.clone()).collect();
    out.extend(m.values.iter().map(|v| v.name.clone()));
    out.extend(m.operations.iter().map(|o| format!("pre_{}", o.name)));
    out.extend(m.functions.iter().map(|f| format!("pre_{}", f.name)));
    out.extend(m.types.iter().map(|r| format!("inv_{}", r.name)));
    out.extend(m.state.iter().map(|s| format!("inv_{}", s.name)));
    out
}

#[test]
fn random_operations_give_closed_obligations() {
    for seed in 0..100 {
        let g = common::random_operation(seed, true);
        let (module, os) = common::generate(&g.source);
        let allowed = module_names(&module);
        for o in &os {
            let free: Vec<String> = o
                .free_variables()
                .into_iter()
                .filter(|v| !allowed.contains(v))
                .collect();
            assert!(free.is_empty(), "seed {seed}: free {free:?} in\n{}", g.source);
        }
    }
}

#[test]
fn branching_paths_partition_inputs_and_match_execution() {
    for seed in 1000..1030 {
        let g = common::random_operation(seed, true);
        if let Err(e) = common::check_against_oracle(&g) {
            panic!("seed {seed}: {e}\n{}", g.source);
        }
    }
}

fn sequential_ifs(k: usize) -> String {
    let mut body = String::new();
    for i in 0..k {
        body.push_str(&format!("    if a > {i} then sv := sv + 1 else xv := xv + 1;\n"));
    }
    format!(
        "state Sigma of\n    sv : nat\n    xv : nat\nend\n\noperations\n  op(a:nat) r:real ==\n  (\n{body}    return 1 / (xv + 1)\n  );\n"
    )
}

#[test]
fn sequential_ifs_double_the_paths() {
    for k in 0..=4 {
        let src = sequential_ifs(k);
        let g = generate_source(&src, "ifs.vdmsl", &PogOptions::default());
        assert!(!g.has_errors(), "{:?}", g.diagnostics);
        let n = g
            .obligations
            .iter()
            .filter(|o| o.kind == ObligationKind::NonZero)
            .count();
        assert_eq!(n, 1 << k, "k = {k}");
        assert!(g.obligations.iter().all(|o| o.status == ObligationStatus::Unproved));
    }
}

#[test]
fn nested_paths_count_three() {
    let src = std::fs::read_to_string(format!("{}/tests/golden/paths.vdmsl", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let g = generate_source(&src, "paths.vdmsl", &PogOptions::default());
    assert_eq!(
        g.obligations
            .iter()
            .filter(|o| o.kind == ObligationKind::NonZero)
            .count(),
        3
    );
}

const GOLDEN: [&str; 9] = [
    "lookup",
    "state_quantifier",
    "assignments",
    "designators",
    "locals",
    "paths",
    "atomic",
    "post",
    "loop",
];

/// Every let in every golden obligation evaluates to a member of the
/// type the generator inferred for it, on the first cases of the outer
/// quantifier.
#[test]
fn inferred_let_types_hold_at_run_time() {
    let b = Bounds {
        nat_max: 2,
        seq_len_max: 2,
        ..Bounds::default()
    };
    let mut checked = 0;
    for name in GOLDEN {
        let src = std::fs::read_to_string(format!("{}/tests/golden/{name}.vdmsl", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let g = generate_source(&src, name, &PogOptions::default());
        let module = g.analysis.unwrap().module;
        let ev = Evaluator::new(&module, b.clone(), None);
        for o in &g.obligations {
            let binds = o.outer_binds();
            let mut streams: Vec<Vec<Value>> = Vec::new();
            for bind in binds {
                streams.push(enumerate_values(&bind.ty, &b, &module).unwrap().take(4).collect());
            }
            let mut cases: Vec<Vec<Value>> = vec![vec![]];
            for s in &streams {
                cases = cases
                    .into_iter()
                    .flat_map(|c| s.iter().map(move |v| [c.clone(), vec![v.clone()]].concat()))
                    .collect();
            }
            for case in cases {
                let mut env = Env::new();
                for (bind, v) in binds.iter().zip(&case) {
                    for (n, x) in pattern_assignment(&bind.pattern, v).unwrap() {
                        env = env.bind(&n, x);
                    }
                }
                for (i, c) in o.context.iter().enumerate().skip(1) {
                    if let ContextClause::LetDef { name: n, ty, value } = c {
                        let Ok(Some(e)) = ev.evaluate_context(&o.context[1..i], env.clone()) else {
                            break;
                        };
                        if let Ok(v) = ev.evaluate(value, &e) {
                            assert!(ev.is_member(&v, ty).unwrap(), "{name}: {n} = {v} is not a {ty:?}");
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 50, "only {checked} lets evaluated");
}

#[test]
fn enumeration_is_deterministic_and_invariant_filtered() {
    let src = "
types
  P ::
    x : nat
    y : nat
  inv mk_P(x, y) == x < y;
  Q ::
    ps : seq of P
    k : nat
  inv q == len q.ps <= q.k;
state Sigma of
    sv : nat
    xv : nat
inv s == s.sv <> s.xv
end
";
    let (module, d) = vdm_pog::frontend::parse_source(src, "inv.vdmsl");
    assert!(d.is_empty(), "{d:?}");
    let b = Bounds {
        nat_max: 3,
        seq_len_max: 2,
        ..Bounds::default()
    };
    let ev = Evaluator::new(&module, b.clone(), None);
    for t in ["P", "Q", "Sigma"] {
        let ty = Type::Named(t.into());
        let a: Vec<Value> = enumerate_values(&ty, &b, &module).unwrap().collect();
        let c: Vec<Value> = enumerate_values(&ty, &b, &module).unwrap().collect();
        assert_eq!(a, c);
        assert!(!a.is_empty());
        for v in &a {
            assert!(matches!(v, Value::Record { checked: true, .. }));
            let inv = Expr::call(&format!("inv_{t}"), vec![Expr::var("v", p())], p());
            assert_eq!(
                ev.evaluate(&inv, &Env::new().bind("v", v.clone())).unwrap(),
                Value::Bool(true),
                "{v}"
            );
        }
    }
}

/// `m(k).f(j) := x` as a let agrees with executing the assignment on
/// randomized small states.
#[test]
fn nested_designator_translation_matches_execution() {
    use rand::{Rng, SeedableRng};
    let src = "
types
  R ::
    f : seq of nat;
state Sigma of
    m : map nat to R
end
operations
  op(k : nat, j : nat, x : nat) ==
    m(k).f(j) := x
  post m = m;
";
    let (module, os) = common::generate(src);
    let o = os.iter().find(|o| o.kind == ObligationKind::PostCondition).unwrap();
    let let_text = match &o.context[1] {
        ContextClause::LetDef { name, value, .. } => format!("{name} = {}", render_expression(value)),
        c => panic!("{c:?}"),
    };
    assert_eq!(let_text, "m = m ++ {k |-> mu(m(k), f |-> (m(k).f) ++ {j |-> x})}");
    let ev = Evaluator::new(&module, Bounds::default(), None);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let op = &module.operations[0];
    for _ in 0..20 {
        let mut m = std::collections::BTreeMap::new();
        for key in 0..rng.gen_range(1..=3i64) {
            let f: Vec<Value> = (0..rng.gen_range(1..=3))
                .map(|_| Value::int(rng.gen_range(0..5)))
                .collect();
            m.insert(Value::int(key), Value::record("R", vec![Value::Seq(f)]));
        }
        let state = Value::record("Sigma", vec![Value::Map(m)]);
        let args = [
            Value::int(rng.gen_range(0..3)),
            Value::int(rng.gen_range(1..3)),
            Value::int(9),
        ];
        let outer = [args[0].clone(), args[1].clone(), args[2].clone(), state.clone()];
        let chain = common::path_result(&ev, o, &outer, &["m"]);
        match ev.execute(op, &args, Some(&state)) {
            Ok(out) => {
                let Some(Value::Record { fields, .. }) = out.state else {
                    panic!()
                };
                assert_eq!(chain, common::PathResult::Taken(fields));
            }
            Err(_) => assert_eq!(chain, common::PathResult::Fault),
        }
    }
}

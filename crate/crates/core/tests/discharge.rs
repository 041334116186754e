//! Enumeration, evaluation and discharge on small hand-checked cases.

use vdm_pog::ast::{ModuleDefinition, ObligationKind, ObligationStatus, Type};
use vdm_pog::discharge::{
    confirms_failure, discharge, discharge_all, enumerate_values, Bounds, DischargeStatus, Env, EvalError, Evaluator,
    Summary, Value,
};
use vdm_pog::driver::generate_source;
use vdm_pog::frontend::{parse_expression, parse_source, Dialect};
use vdm_pog::pog::PogOptions;

fn module(src: &str) -> ModuleDefinition {
    let (m, d) = parse_source(src, "t.vdmsl");
    assert!(d.is_empty(), "{d:?}");
    m
}

fn eval(m: &ModuleDefinition, src: &str) -> Result<Value, EvalError> {
    let e = parse_expression(src, Dialect::Obligation).unwrap();
    Evaluator::new(m, Bounds::default(), None).evaluate(&e, &Env::new())
}

fn bounds(nat_max: i64) -> Bounds {
    Bounds {
        nat_max,
        ..Bounds::default()
    }
}

const SIGMA_INV: &str = "
state Sigma of
    sv : nat
    xv : nat
inv s == s.sv <> s.xv
end
";

const RECORDS: &str = "
types
  R ::
    size : real;
state Sigma of
    sv : nat
    xv : nat
inv s == s.sv <> s.xv
end
";

#[test]
fn nat_enumeration_is_bounded_and_ascending() {
    let m = ModuleDefinition::default();
    let got: Vec<Value> = enumerate_values(&Type::Nat, &bounds(2), &m).unwrap().collect();
    assert_eq!(got, vec![Value::int(0), Value::int(1), Value::int(2)]);
}

#[test]
fn record_enumeration_filters_by_invariant() {
    let m = module(SIGMA_INV);
    let got: Vec<Value> = enumerate_values(&Type::Named("Sigma".into()), &bounds(1), &m)
        .unwrap()
        .collect();
    let want = vec![
        Value::record("Sigma", vec![Value::int(0), Value::int(1)]),
        Value::record("Sigma", vec![Value::int(1), Value::int(0)]),
    ];
    assert_eq!(got, want);
    assert!(got.iter().all(|v| matches!(v, Value::Record { checked: true, .. })));
}

#[test]
fn sequence_enumeration_by_length_then_lexicographic() {
    let m = ModuleDefinition::default();
    let b = Bounds {
        nat_max: 1,
        seq_len_max: 1,
        ..Bounds::default()
    };
    let got: Vec<String> = enumerate_values(&Type::seq(Type::Nat), &b, &m)
        .unwrap()
        .map(|v| v.to_string())
        .collect();
    assert_eq!(got, ["[]", "[0]", "[1]"]);
}

#[test]
fn set_and_map_enumeration_orders() {
    let m = ModuleDefinition::default();
    let b = Bounds {
        nat_max: 1,
        set_size_max: 2,
        map_size_max: 1,
        ..Bounds::default()
    };
    let sets: Vec<String> = enumerate_values(&Type::set(Type::Nat), &b, &m)
        .unwrap()
        .map(|v| v.to_string())
        .collect();
    assert_eq!(sets, ["{}", "{0}", "{1}", "{0, 1}"]);
    let maps: Vec<String> = enumerate_values(&Type::map(Type::Nat, Type::Bool), &b, &m)
        .unwrap()
        .map(|v| v.to_string())
        .collect();
    assert_eq!(
        maps,
        [
            "{|->}",
            "{0 |-> false}",
            "{0 |-> true}",
            "{1 |-> false}",
            "{1 |-> true}"
        ]
    );
}

#[test]
fn real_enumeration_is_small_rationals() {
    let m = ModuleDefinition::default();
    let b = Bounds {
        int_max: 1,
        ..Bounds::default()
    };
    let got: Vec<String> = enumerate_values(&Type::Real, &b, &m)
        .unwrap()
        .map(|v| v.to_string())
        .collect();
    assert_eq!(got, ["-1", "-1/2", "-1/3", "0", "1/3", "1/2", "1"]);
}

#[test]
fn mu_replaces_fields() {
    let m = module(RECORDS);
    assert_eq!(
        eval(&m, "mu(mk_R(1), size |-> 456)").unwrap(),
        Value::record("R", vec![Value::int(456)])
    );
}

#[test]
fn sequence_override() {
    let m = module(RECORDS);
    assert_eq!(
        eval(&m, "[mk_R(1), mk_R(2)] ++ {1 |-> mk_R(456)}").unwrap().to_string(),
        "[mk_R(456), mk_R(2)]"
    );
    assert!(matches!(eval(&m, "[1] ++ {2 |-> 0}"), Err(EvalError::Fault { .. })));
}

#[test]
fn maximal_constructor_skips_invariant() {
    let m = module(RECORDS);
    match eval(&m, "mk_Sigma!(0, 0)").unwrap() {
        Value::Record { checked, fields, .. } => {
            assert!(!checked);
            assert_eq!(fields, vec![Value::int(0), Value::int(0)]);
        }
        v => panic!("{v}"),
    }
    assert!(matches!(eval(&m, "mk_Sigma(0, 0)"), Err(EvalError::Fault { .. })));
    assert_eq!(eval(&m, "inv_Sigma(mk_Sigma!(0, 0))").unwrap(), Value::Bool(false));
}

#[test]
fn arithmetic_semantics() {
    let m = ModuleDefinition::default();
    let cases = [
        ("7 div 2", "3"),
        ("-7 div 2", "-3"),
        ("-7 mod 2", "1"),
        ("-7 rem 2", "-1"),
        ("1 / 3 + 1 / 6", "1/2"),
        ("2.5 * 2", "5"),
        ("floor (-1 / 2)", "-1"),
        ("abs -3", "3"),
    ];
    for (src, want) in cases {
        assert_eq!(eval(&m, src).unwrap().to_string(), want, "{src}");
    }
    for src in ["1 / 0", "1 div 0", "{1 |-> 2}(3)", "[1](2)", "hd []", "tl []"] {
        assert!(matches!(eval(&m, src), Err(EvalError::Fault { .. })), "{src}");
    }
}

#[test]
fn connectives_short_circuit() {
    let m = ModuleDefinition::default();
    assert_eq!(eval(&m, "false and (1 / 0 = 1)").unwrap(), Value::Bool(false));
    assert_eq!(eval(&m, "true or (1 / 0 = 1)").unwrap(), Value::Bool(true));
    assert_eq!(eval(&m, "false => (1 / 0 = 1)").unwrap(), Value::Bool(true));
}

fn obligations(src: &str) -> (ModuleDefinition, Vec<vdm_pog::ast::Obligation>) {
    let g = generate_source(src, "t.vdmsl", &PogOptions::default());
    assert!(!g.has_errors(), "{:?}", g.diagnostics);
    (g.analysis.unwrap().module, g.obligations)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}.vdmsl", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn precondition_guards_division() {
    let (m, os) = obligations(&golden("state_quantifier"));
    let b = bounds(3);
    let r = discharge(&os[0], &b, &m).unwrap();
    assert_eq!(r.status, DischargeStatus::VerifiedAtBound);
    // Every (a, sv) with sv > a leaves a non-zero divisor.
    let oracle_ok = (0..=3i64).all(|a| (0..=3i64).all(|sv| sv <= a || sv - a != 0));
    assert!(oracle_ok);
    assert_eq!(r.cases_tried, 4 * 4 * 4);
}

#[test]
fn chained_assignments_keep_divisor_positive() {
    let (m, os) = obligations(&golden("assignments"));
    let b = bounds(3);
    let r = discharge(&os[0], &b, &m).unwrap();
    // xv' = xv + (sv + 1) >= 1 on the whole grid.
    let oracle_ok = (0..=3).all(|sv: i64| (0..=3).all(|xv: i64| xv + (sv + 1) != 0));
    assert!(oracle_ok);
    assert_eq!(r.status, DischargeStatus::VerifiedAtBound);
    assert_eq!(r.cases_tried, 4 * 4 * 4);
}

#[test]
fn zero_witness() {
    let src = "
functions
  f: nat -> nat
  f(z) == 10 div z
";
    let (m2, os) = obligations(src);
    assert_eq!(os[0].kind, ObligationKind::NonZero);
    let r = discharge(&os[0], &Bounds::default(), &m2).unwrap();
    assert_eq!(r.status, DischargeStatus::Failed);
    let cx = r.counterexample.clone().unwrap();
    assert_eq!(cx.0, vec![("z".to_string(), Value::int(0))]);
    assert!(confirms_failure(&os[0], &r, &Bounds::default(), &m2));
}

#[test]
fn faulting_case_is_failed_with_reason() {
    let src = "
state Sigma of
    s : seq of nat
end
operations
  op() r:nat ==
    return 1 div hd s
";
    let (m, os) = obligations(src);
    let r = discharge(&os[0], &bounds(1), &m).unwrap();
    assert_eq!(r.status, DischargeStatus::Failed);
    assert_eq!(r.counterexample.as_ref().unwrap().get("s"), Some(&Value::Seq(vec![])));
    assert!(r.fault.as_deref().unwrap().contains("hd of an empty sequence"));
    assert!(confirms_failure(&os[0], &r, &bounds(1), &m));
}

#[test]
fn budget_exhaustion() {
    let (m, os) = obligations(&golden("state_quantifier"));
    let b = Bounds {
        max_cases: 5,
        ..Bounds::default()
    };
    let r = discharge(&os[0], &b, &m).unwrap();
    assert_eq!(r.status, DischargeStatus::Exhausted);
    assert_eq!(r.cases_tried, 5);
}

#[test]
fn summary_counts() {
    let m = ModuleDefinition::default();
    let empty = discharge_all(&[], &Bounds::default(), &m, 1).unwrap();
    assert_eq!(empty, Summary::from_results(vec![]));
    assert_eq!(
        (
            empty.total,
            empty.verified,
            empty.failed,
            empty.unchecked,
            empty.exhausted
        ),
        (0, 0, 0, 0, 0)
    );

    let (m, mut os) = obligations(&golden("state_quantifier"));
    os[0].status = ObligationStatus::Unchecked;
    let s = discharge_all(&os, &Bounds::default(), &m, 2).unwrap();
    assert_eq!(s.unchecked, 1);
    assert_eq!(s.results[0].status, DischargeStatus::UncheckedSkipped);
    assert_eq!(s.results[0].cases_tried, 0);
    assert!(s.table().contains("UncheckedSkipped"));
}

#[test]
fn determinism_and_job_independence() {
    let (m, os) = obligations(&golden("paths"));
    let b = bounds(3);
    let a = discharge_all(&os, &b, &m, 1).unwrap();
    let c = discharge_all(&os, &b, &m, 4).unwrap();
    assert_eq!(a, c);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
}

#[test]
fn summary_json_shape() {
    let src = "
functions
  f: nat -> nat
  f(z) == 10 div z
";
    let (m, os) = obligations(src);
    let s = discharge_all(&os, &Bounds::default(), &m, 1).unwrap();
    let j: serde_json::Value = serde_json::to_value(&s).unwrap();
    for k in ["total", "verified", "failed", "unchecked", "exhausted", "results"] {
        assert!(j.get(k).is_some(), "{k}");
    }
    let r = &j["results"][0];
    assert_eq!(r["ordinal"], 1);
    assert_eq!(r["status"], "Failed");
    assert_eq!(r["casesTried"], 1);
    assert_eq!(r["counterexample"]["z"], "0");
}

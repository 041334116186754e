//! The bundled example modules: coverage of every obligation kind, the
//! seeded defects, and soundness of every failure found.

mod common;

use std::collections::BTreeSet;

use common::{corpus_bounds, load_dir};
use vdm_pog::ast::{ObligationKind, ObligationStatus};
use vdm_pog::discharge::{confirms_failure, discharge_all, DischargeStatus, Value};

#[test]
fn corpus_is_large_enough_and_covers_every_kind() {
    let corpus = load_dir("corpus");
    assert!(corpus.len() >= 15, "{}", corpus.len());
    let kinds: BTreeSet<String> = corpus
        .iter()
        .flat_map(|l| l.obligations.iter().map(|o| format!("{:?}", o.kind)))
        .collect();
    for k in ObligationKind::ALL {
        assert!(kinds.contains(&format!("{k:?}")), "{k:?} missing");
    }
}

#[test]
fn failures_are_exactly_the_seeded_defects_and_all_confirm() {
    let b = corpus_bounds();
    let mut failed = Vec::new();
    for l in load_dir("corpus") {
        let s = discharge_all(&l.obligations, &b, &l.module, 2).unwrap();
        for (o, r) in l.obligations.iter().zip(&s.results) {
            if r.status == DischargeStatus::Failed {
                assert!(confirms_failure(o, r, &b, &l.module), "{} #{}", l.name, o.ordinal);
                failed.push(format!("{}:{}:{}", l.name, o.operation_name, o.ordinal));
            }
        }
    }
    assert_eq!(failed, ["board:mark:1", "board:mark:2", "counter:collapse:3"]);
}

#[test]
fn missing_index_precondition_is_found() {
    let corpus = load_dir("corpus");
    let board = corpus.iter().find(|l| l.name == "board").unwrap();
    let s = discharge_all(&board.obligations, &corpus_bounds(), &board.module, 1).unwrap();
    let o = &board.obligations[0];
    assert_eq!(o.kind, ObligationKind::SeqApply);
    let r = &s.results[0];
    assert_eq!(r.status, DischargeStatus::Failed);
    let cx = r.counterexample.as_ref().unwrap();
    assert_eq!(cx.get("i"), Some(&Value::int(0)));
    // The guarded lookup in the same module is fine.
    assert_eq!(s.results[2].status, DischargeStatus::VerifiedAtBound);
}

#[test]
fn call_ambiguity_statuses() {
    let corpus = load_dir("corpus");
    let calls = corpus.iter().find(|l| l.name == "calls").unwrap();
    let got: Vec<(&str, ObligationStatus)> = calls
        .obligations
        .iter()
        .map(|o| (o.operation_name.as_str(), o.status))
        .collect();
    use ObligationStatus::{Unchecked, Unproved};
    assert_eq!(
        got,
        [
            ("afterReset", Unchecked),
            ("afterBump", Unproved),
            ("afterBumpScale", Unchecked),
            ("afterPeek", Unproved),
            ("fromCall", Unchecked),
            ("resetThenSet", Unproved),
        ]
    );
}

#[test]
fn unannotated_loop_is_unchecked() {
    let corpus = load_dir("corpus");
    let l = corpus.iter().find(|l| l.name == "loop_seq").unwrap();
    let unchecked: Vec<&str> = l
        .obligations
        .iter()
        .filter(|o| o.status == ObligationStatus::Unchecked)
        .map(|o| o.operation_name.as_str())
        .collect();
    assert_eq!(unchecked, ["firstOf", "firstOf"]);
}

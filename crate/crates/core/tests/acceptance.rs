//! One line per acceptance criterion. Runs without the test harness so
//! the lines are always printed; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{corpus_bounds, load_dir, outer_env, Loaded};
use vdm_pog::ast::{ObligationKind, ObligationStatus, Type};
use vdm_pog::discharge::{
    confirms_failure, discharge, discharge_all, enumerate_values, Bounds, DischargeStatus, Evaluator, Value,
};
use vdm_pog::driver::generate_source;
use vdm_pog::pog::PogOptions;
use vdm_pog::render::{normalize_whitespace, render_obligation, render_obligation_body, RenderStyle};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn golden_path(name: &str) -> String {
    format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn generated(src: &str, experimental: bool) -> vdm_pog::driver::Generated {
    let opts = PogOptions {
        experimental_loop_functions: experimental,
        ..Default::default()
    };
    let g = generate_source(src, "acceptance.vdmsl", &opts);
    assert!(!g.has_errors(), "{:?}", g.diagnostics);
    g
}

fn matches_listing(name: &str, expected: &str, ordinal: u32, experimental: bool, header: bool) -> Result<(), String> {
    let src = std::fs::read_to_string(golden_path(&format!("{name}.vdmsl"))).unwrap();
    let want = std::fs::read_to_string(golden_path(expected)).unwrap();
    let g = generated(&src, experimental);
    let o = g
        .obligations
        .iter()
        .find(|o| o.ordinal == ordinal)
        .ok_or_else(|| format!("{name}: no obligation {ordinal}"))?;
    let style = RenderStyle::default();
    let got = if header {
        render_obligation(o, &style)
    } else {
        render_obligation_body(o, &style)
    };
    if normalize_whitespace(&got) == normalize_whitespace(&want) {
        Ok(())
    } else {
        Err(format!("{expected} differs:\n{got}"))
    }
}

fn golden_listings() -> Check {
    let start = Instant::now();
    let cases = [
        ("lookup", "lookup.po1.expected", 1, true),
        ("state_quantifier", "state_quantifier.po1.expected", 1, true),
        ("assignments", "assignments.po1.expected", 1, true),
        ("designators", "designators.po2.expected", 2, true),
        ("locals", "locals.po1.expected", 1, true),
        ("paths", "paths.po1.expected", 1, true),
        ("paths", "paths.po2.expected", 2, true),
        ("paths", "paths.po3.expected", 3, true),
        ("atomic", "atomic.po1.expected", 1, false),
        ("post", "post.po1.expected", 1, false),
    ];
    for (name, expected, ordinal, header) in cases {
        matches_listing(name, expected, ordinal, false, header)?;
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} listings identical in {elapsed:?}", cases.len()))
}

fn loop_forms() -> Check {
    matches_listing("loop", "loop.experimental.po1.expected", 1, true, false)?;
    let src = std::fs::read_to_string(golden_path("loop.vdmsl")).unwrap();
    let g = generated(&src, false);
    let count = |k| g.obligations.iter().filter(|o| o.kind == k).count();
    let (est, pre) = (
        count(ObligationKind::LoopInvariantEstablish),
        count(ObligationKind::LoopInvariantPreserve),
    );
    if (est, pre) != (1, 1) {
        return Err(format!("{est} establish and {pre} preserve obligations"));
    }
    // The same loop with a division after it, with and without its annotation.
    let with_division = src.replace("  -- Here, invariant holds and s = []", "  ;\n  count := 10 div count");
    let divisions = |src: &str| -> Vec<ObligationStatus> {
        generated(src, false)
            .obligations
            .iter()
            .filter(|o| o.kind == ObligationKind::NonZero)
            .map(|o| o.status)
            .collect()
    };
    let annotated = divisions(&with_division);
    let bare = divisions(&with_division.replace("-- @LoopInvariant", "-- LoopInvariant"));
    if annotated != [ObligationStatus::Unproved] {
        return Err(format!("annotated loop division: {annotated:?}"));
    }
    if bare != [ObligationStatus::Unchecked] {
        return Err(format!("unannotated loop division: {bare:?}"));
    }
    Ok("experimental form identical; 1 establish, 1 preserve; unannotated loop leaves NonZero Unchecked".into())
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

fn path_counts() -> Check {
    let mut counts = Vec::new();
    for k in 0..=4 {
        let g = generated(&sequential_ifs(k), false);
        let n = g
            .obligations
            .iter()
            .filter(|o| o.kind == ObligationKind::NonZero)
            .count();
        if n != 1 << k {
            return Err(format!("k = {k}: {n} obligations"));
        }
        counts.push(n.to_string());
    }
    let src = std::fs::read_to_string(golden_path("paths.vdmsl")).unwrap();
    let nested = generated(&src, false)
        .obligations
        .iter()
        .filter(|o| o.kind == ObligationKind::NonZero)
        .count();
    if nested != 3 {
        return Err(format!("nested shape: {nested}"));
    }
    Ok(format!("k = 0..4 gives {}; nested gives 3", counts.join(", ")))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let (mut ops, mut cases, mut paths) = (0, 0, 0);
    for seed in 0..60 {
        let g = common::random_operation(seed, false);
        let s = common::check_against_oracle(&g).map_err(|e| format!("seed {seed}: {e}\n{}", g.source))?;
        ops += 1;
        cases += s.cases;
        paths += s.paths;
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{ops} operations, {paths} paths, {cases} cases equal to execution in {elapsed:?}"
    ))
}

const NAIVE_SWAP: &str = "
state Sigma of
    sv : real
    xv : real
inv s == s.sv <> s.xv
end

operations
op(a:nat) r:real ==
(
    sv := xv;
    xv := sv;
    return 1 / (sv - xv + 1)
);
";

/// Final `(sv, xv)` of the first obligation's context for every state at the bound.
fn final_states(src: &str, kind: ObligationKind, b: &Bounds) -> Vec<((Value, Value), (Value, Value))> {
    let g = generated(src, false);
    let module = g.analysis.unwrap().module;
    let o = g.obligations.iter().find(|o| o.kind == kind).unwrap();
    let ev = Evaluator::new(&module, b.clone(), None);
    let states: Vec<Value> = enumerate_values(&Type::Named("Sigma".into()), b, &module)
        .unwrap()
        .collect();
    states
        .into_iter()
        .map(|st| {
            let Value::Record { fields, .. } = &st else {
                panic!("{st}")
            };
            let before = (fields[0].clone(), fields[1].clone());
            let env = ev
                .evaluate_context(&o.context[1..], outer_env(o, &[Value::int(0), st.clone()]))
                .unwrap()
                .expect("straight-line context is always taken");
            let after = (env.get("sv").unwrap().clone(), env.get("xv").unwrap().clone());
            (before, after)
        })
        .collect()
}

fn atomic_semantics() -> Check {
    let b = Bounds {
        nat_max: 3,
        int_min: -3,
        int_max: 3,
        ..Bounds::default()
    };
    let src = std::fs::read_to_string(golden_path("atomic.vdmsl")).unwrap();
    let swapped = final_states(&src, ObligationKind::StateInvariant, &b);
    for ((sv, xv), after) in &swapped {
        if after != &(xv.clone(), sv.clone()) {
            return Err(format!("sv = {sv}, xv = {xv} ends as {after:?}"));
        }
    }
    let g = generated(&src, false);
    let module = g.analysis.unwrap().module;
    let r = discharge(&g.obligations[0], &b, &module).map_err(|e| e.to_string())?;
    if r.status != DischargeStatus::VerifiedAtBound {
        return Err(format!("state invariant obligation: {}", r.status));
    }
    let naive = final_states(NAIVE_SWAP, ObligationKind::NonZero, &b);
    let differing = naive.iter().zip(&swapped).filter(|((_, n), (_, s))| n != s).count();
    if differing == 0 {
        return Err("sequential assignments agree with the atomic swap everywhere".into());
    }
    Ok(format!(
        "{} states swapped, invariant VerifiedAtBound in {} cases, sequential variant differs on {differing}",
        swapped.len(),
        r.cases_tried
    ))
}

const AMBIGUITY_HEAD: &str = "
state Sigma of
    sv : nat
    xv : nat
end

operations
  q() ==
    sv := 2;

  w() ==
    xv := 1
  ext wr xv;

  pure p() r:nat ==
    return sv;
";

fn statuses(body: &str) -> Vec<ObligationStatus> {
    let src = format!("{AMBIGUITY_HEAD}\n  op() r:real ==\n  (\n{body}\n  );\n");
    generated(&src, false)
        .obligations
        .iter()
        .filter(|o| o.operation_name == "op")
        .map(|o| o.status)
        .collect()
}

fn ambiguity_rules() -> Check {
    use ObligationStatus::{Unchecked, Unproved};
    let scenarios: [(&str, &str, Vec<ObligationStatus>); 5] = [
        ("bare call", "    q();\n    return 1 / sv", vec![Unchecked]),
        (
            "ext wr call",
            "    w();\n    return 1 / sv + 1 / xv",
            vec![Unproved, Unchecked],
        ),
        ("pure call", "    p();\n    return 1 / sv", vec![Unproved]),
        ("call result", "    sv := p();\n    return 1 / sv", vec![Unchecked]),
        (
            "reassigned after call",
            "    q();\n    sv := 5;\n    return 1 / sv",
            vec![Unproved],
        ),
    ];
    let mut seen = Vec::new();
    for (name, body, want) in scenarios {
        let got = statuses(body);
        if got != want {
            return Err(format!("{name}: {got:?}, expected {want:?}"));
        }
        seen.push(format!("{name} {got:?}"));
    }
    Ok(seen.join("; "))
}

fn discharged(l: &Loaded, b: &Bounds, jobs: usize) -> vdm_pog::discharge::Summary {
    discharge_all(&l.obligations, b, &l.module, jobs).unwrap()
}

fn discharge_soundness() -> Check {
    let b = corpus_bounds();
    let golden = load_dir("golden");
    let corpus = load_dir("corpus");
    let (mut failed, mut verified) = (0, 0);
    for l in golden.iter().chain(&corpus) {
        let s = discharged(l, &b, 1);
        for (o, r) in l.obligations.iter().zip(&s.results) {
            if r.status == DischargeStatus::Failed {
                if !confirms_failure(o, r, &b, &l.module) {
                    return Err(format!("{} obligation {} does not reproduce", l.name, o.ordinal));
                }
                failed += 1;
            }
        }
    }
    for l in &golden {
        let runs = [discharged(l, &b, 1), discharged(l, &b, 1), discharged(l, &b, 4)];
        let verified_ordinals = |s: &vdm_pog::discharge::Summary| -> Vec<u32> {
            s.results
                .iter()
                .filter(|r| r.status == DischargeStatus::VerifiedAtBound)
                .map(|r| r.ordinal)
                .collect()
        };
        let first = verified_ordinals(&runs[0]);
        if runs.iter().any(|r| verified_ordinals(r) != first) {
            return Err(format!("{}: verified set changes between runs", l.name));
        }
        verified += first.len();
    }
    Ok(format!(
        "{failed} failures reproduce; {verified} golden VerifiedAtBound results stable over runs and jobs"
    ))
}

fn corpus_substitute() -> Check {
    let corpus = load_dir("corpus");
    if corpus.len() < 15 {
        return Err(format!("only {} modules", corpus.len()));
    }
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    let (mut total, mut unchecked) = (0, 0);
    for l in &corpus {
        for o in &l.obligations {
            *kinds.entry(format!("{:?}", o.kind)).or_default() += 1;
            total += 1;
            unchecked += usize::from(o.status == ObligationStatus::Unchecked);
        }
    }
    for k in ObligationKind::ALL {
        if !kinds.contains_key(&format!("{k:?}")) {
            return Err(format!("{k:?} never emitted"));
        }
    }
    let board = corpus.iter().find(|l| l.name == "board").unwrap();
    let s = discharged(board, &corpus_bounds(), 1);
    if s.results[0].status != DischargeStatus::Failed {
        return Err(format!("seeded defect is {}", s.results[0].status));
    }
    let failed: usize = corpus.iter().map(|l| discharged(l, &corpus_bounds(), 1).failed).sum();
    let by_kind: Vec<String> = kinds.iter().map(|(k, n)| format!("{k} {n}")).collect();
    Ok(format!(
        "published corpus statistics depend on an external example suite and are not reproduced; \
         substitute: {} modules, {total} obligations ({}), {unchecked} Unchecked, {failed} Failed incl. seeded board defect",
        corpus.len(),
        by_kind.join(", ")
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden listings", golden_listings),
        ("loop forms", loop_forms),
        ("path counts", path_counts),
        ("oracle equivalence", oracle_equivalence),
        ("atomic semantics", atomic_semantics),
        ("ambiguity rules", ambiguity_rules),
        ("discharge soundness", discharge_soundness),
        ("substitute corpus", corpus_substitute),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                all = false;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    if !all {
        std::process::exit(1);
    }
}

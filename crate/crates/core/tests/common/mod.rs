//! Random straight-line operations and the imperative oracle they are
//! checked against.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vdm_pog::ast::{ModuleDefinition, Obligation, ObligationKind, Type};
use vdm_pog::discharge::{enumerate_values, pattern_assignment, Bounds, Env, EvalError, Evaluator, Value};
use vdm_pog::driver::generate_source;
use vdm_pog::pog::PogOptions;

/// State fields the generator draws from, with their source types.
const POOL: [(&str, &str); 6] = [
    ("n", "nat"),
    ("s", "seq of nat"),
    ("m", "map nat to nat"),
    ("r", "R"),
    ("rs", "seq of R"),
    ("mr", "map nat to R"),
];

/// Upper bound on enumerated states per generated module.
const STATE_BUDGET: u128 = 6_000;

pub fn oracle_bounds() -> Bounds {
    Bounds {
        nat_max: 2,
        seq_len_max: 2,
        set_size_max: 1,
        map_size_max: 1,
        ..Bounds::default()
    }
}

pub struct Generated {
    pub source: String,
    pub fields: Vec<&'static str>,
}

struct Gen {
    rng: ChaCha8Rng,
    fields: Vec<&'static str>,
    local: bool,
}

impl Gen {
    fn has(&self, f: &str) -> bool {
        self.fields.contains(&f)
    }

    fn pick(&mut self, options: &[String]) -> String {
        options.choose(&mut self.rng).unwrap().clone()
    }

    fn nat(&mut self, depth: u32) -> String {
        let mut o: Vec<String> = ["0", "1", "2", "p"].iter().map(|s| s.to_string()).collect();
        if self.local {
            o.push("t".into());
        }
        if self.has("n") {
            o.push("n".into());
        }
        if self.has("s") {
            o.push("len s".into());
        }
        if self.has("r") {
            o.push("r.a".into());
        }
        if self.has("m") {
            o.push("card dom m".into());
        }
        if depth > 0 && self.rng.gen_bool(0.3) {
            let a = self.nat(depth - 1);
            let b = self.nat(depth - 1);
            return format!("({a} + {b})");
        }
        self.pick(&o)
    }

    fn seq(&mut self) -> String {
        let a = self.nat(0);
        let b = self.nat(0);
        let mut o = vec!["[]".to_string(), format!("[{a}]"), format!("[{a}, {b}]")];
        if self.has("s") {
            o.push("s".into());
            o.push(format!("s ^ [{a}]"));
        }
        if self.has("r") {
            o.push("r.q".into());
        }
        self.pick(&o)
    }

    fn map(&mut self) -> String {
        let k = self.nat(0);
        let v = self.nat(0);
        let mut o = vec!["{|->}".to_string(), format!("{{{k} |-> {v}}}")];
        if self.has("m") {
            o.push(format!("m ++ {{{k} |-> {v}}}"));
        }
        self.pick(&o)
    }

    fn record(&mut self) -> String {
        let a = self.nat(1);
        let q = self.seq();
        let mut o = vec![format!("mk_R({a}, {q})")];
        if self.has("r") {
            o.push("r".into());
            o.push(format!("mu(r, a |-> {a})"));
        }
        self.pick(&o)
    }

    fn index(&mut self) -> String {
        let mut o: Vec<String> = ["1", "2", "p"].iter().map(|s| s.to_string()).collect();
        if self.has("n") {
            o.push("n".into());
        }
        if self.has("s") {
            o.push("len s".into());
        }
        self.pick(&o)
    }

    fn key(&mut self) -> String {
        let o: Vec<String> = ["0", "1", "p"].iter().map(|s| s.to_string()).collect();
        self.pick(&o)
    }

    fn assignment(&mut self) -> String {
        let f = *self.fields.choose(&mut self.rng).unwrap();
        let choice = self.rng.gen_range(0..4);
        match f {
            "n" => format!("n := {}", self.nat(2)),
            "s" => match choice % 2 {
                0 => format!("s := {}", self.seq()),
                _ => format!("s({}) := {}", self.index(), self.nat(1)),
            },
            "m" => match choice % 2 {
                0 => format!("m := {}", self.map()),
                _ => format!("m({}) := {}", self.key(), self.nat(1)),
            },
            "r" => match choice {
                0 => format!("r := {}", self.record()),
                1 => format!("r.a := {}", self.nat(1)),
                2 => format!("r.q := {}", self.seq()),
                _ => format!("r.q({}) := {}", self.index(), self.nat(1)),
            },
            "rs" => match choice % 3 {
                0 => format!("rs({}) := {}", self.index(), self.record()),
                1 => format!("rs({}).a := {}", self.index(), self.nat(1)),
                _ => format!("rs({}).q({}) := {}", self.index(), self.index(), self.nat(1)),
            },
            _ => match choice % 3 {
                0 => format!("mr({}) := {}", self.key(), self.record()),
                1 => format!("mr({}).a := {}", self.key(), self.nat(1)),
                _ => format!("mr({}).q({}) := {}", self.key(), self.index(), self.nat(1)),
            },
        }
    }

    fn statement(&mut self, branching: bool) -> String {
        if branching && self.rng.gen_bool(0.3) {
            let a = self.nat(1);
            let b = self.nat(1);
            let rel = ["<", "=", "<>"].choose(&mut self.rng).unwrap();
            let then = self.assignment();
            if self.rng.gen_bool(0.5) {
                let els = self.assignment();
                return format!("if {a} {rel} {b} then {then} else {els}");
            }
            return format!("if {a} {rel} {b} then {then}");
        }
        self.assignment()
    }
}

fn size(field: &str) -> u128 {
    // nat 3, seq of nat 13, R = 3 * 13 at the oracle bounds.
    match field {
        "n" => 3,
        "s" => 13,
        "m" => 10,
        "r" => 39,
        "rs" => 1 + 39 + 39 * 39,
        _ => 1 + 3 * 39,
    }
}

/// One module with a state drawn from the pool and a single operation
/// `op(p:nat)` whose postcondition mentions every state field.
pub fn random_operation(seed: u64, branching: bool) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<&'static str> = POOL.iter().map(|(n, _)| *n).collect();
    all.shuffle(&mut rng);
    let want = rng.gen_range(1..=3);
    let mut fields: Vec<&'static str> = Vec::new();
    for f in all {
        if fields.len() == want {
            break;
        }
        let cost: u128 = fields.iter().map(|f: &&str| size(f)).product::<u128>() * size(f) * 3;
        if cost <= STATE_BUDGET {
            fields.push(f);
        }
    }
    fields.sort_by_key(|f| POOL.iter().position(|(n, _)| n == f));
    let mut g = Gen {
        rng,
        fields: fields.clone(),
        local: false,
    };
    let count = g.rng.gen_range(1..=4);
    let with_local = g.rng.gen_bool(0.3);
    let mut stmts = Vec::new();
    let mut dcl = String::new();
    if with_local {
        dcl = format!("dcl t : nat := {};\n    ", g.nat(1));
        g.local = true;
    }
    for _ in 0..count {
        stmts.push(g.statement(branching));
    }
    let ty = |f: &str| POOL.iter().find(|(n, _)| *n == f).unwrap().1;
    let state: Vec<String> = fields.iter().map(|f| format!("    {f} : {}", ty(f))).collect();
    let tuple = format!("mk_({}, true)", fields.join(", "));
    let source = format!(
        "types\n  R ::\n    a : nat\n    q : seq of nat;\n\nstate Sigma of\n{}\nend\n\noperations\n  op(p : nat) ==\n  (\n    {dcl}{}\n  )\n  post {tuple} = {tuple};\n",
        state.join("\n"),
        stmts.join(";\n    ")
    );
    Generated { source, fields }
}

/// How one path's context evaluated for one input.
#[derive(Debug, Clone, PartialEq)]
pub enum PathResult {
    NotTaken,
    Taken(Vec<Value>),
    Fault,
}

pub fn generate(source: &str) -> (ModuleDefinition, Vec<Obligation>) {
    let g = generate_source(source, "gen.vdmsl", &PogOptions::default());
    assert!(!g.has_errors(), "{source}\n{:?}", g.diagnostics);
    (g.analysis.unwrap().module, g.obligations)
}

/// Evaluates the context of `o` after its outer quantifier, reading the
/// state fields at the end.
pub fn path_result(ev: &Evaluator, o: &Obligation, outer: &[Value], fields: &[&str]) -> PathResult {
    match ev.evaluate_context(&o.context[1..], outer_env(o, outer)) {
        Ok(Some(env)) => Taken(
            fields
                .iter()
                .map(|f| env.get(f).cloned().expect("field bound"))
                .collect(),
        ),
        Ok(None) => NotTaken,
        Err(EvalError::Fault { .. }) => Fault,
        Err(e) => panic!("context evaluation: {e}"),
    }
}

use PathResult::{Fault, NotTaken, Taken};

pub fn outer_env(o: &Obligation, outer: &[Value]) -> Env {
    let mut env = Env::new();
    for (b, v) in o.outer_binds().iter().zip(outer) {
        for (n, x) in pattern_assignment(&b.pattern, v).expect("outer value matches its bind") {
            env = env.bind(&n, x);
        }
    }
    env
}

/// True when `o` is false or faults for the outer values.
pub fn violated(ev: &Evaluator, o: &Obligation, outer: &[Value]) -> bool {
    !matches!(
        ev.evaluate(&o.body_expression(), &outer_env(o, outer)),
        Ok(Value::Bool(true))
    )
}

/// Statistics of one oracle comparison.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleStats {
    pub cases: u64,
    pub faults: u64,
    pub paths: usize,
}

/// Compares every post-condition path of the generated operation with
/// imperative execution on all inputs within the oracle bounds. Returns
/// a description of the first disagreement.
pub fn check_against_oracle(g: &Generated) -> Result<OracleStats, String> {
    let (module, obligations) = generate(&g.source);
    let posts: Vec<&Obligation> = obligations
        .iter()
        .filter(|o| o.kind == ObligationKind::PostCondition)
        .collect();
    if posts.is_empty() {
        return Err("no postcondition obligations".into());
    }
    let guards: Vec<&Obligation> = obligations
        .iter()
        .filter(|o| matches!(o.kind, ObligationKind::MapApply | ObligationKind::SeqApply))
        .collect();
    let b = oracle_bounds();
    let ev = Evaluator::new(&module, b.clone(), None);
    let op = &module.operations[0];
    let params: Vec<Value> = enumerate_values(&Type::Nat, &b, &module).unwrap().collect();
    let states: Vec<Value> = enumerate_values(&Type::Named("Sigma".into()), &b, &module)
        .unwrap()
        .collect();
    let mut stats = OracleStats {
        paths: posts.len(),
        ..OracleStats::default()
    };
    for p in &params {
        for st in &states {
            stats.cases += 1;
            let outer = [p.clone(), st.clone()];
            let results: Vec<PathResult> = posts.iter().map(|o| path_result(&ev, o, &outer, &g.fields)).collect();
            let taken: Vec<&Vec<Value>> = results
                .iter()
                .filter_map(|r| match r {
                    Taken(v) => Some(v),
                    _ => None,
                })
                .collect();
            let faulted = results.contains(&Fault);
            match ev.execute(op, std::slice::from_ref(p), Some(st)) {
                Ok(out) => {
                    let Some(Value::Record { fields, .. }) = out.state else {
                        return Err("execution lost the state".into());
                    };
                    if taken.len() != 1 || faulted {
                        return Err(format!(
                            "p = {p}, state = {st}: {} paths taken, fault = {faulted}",
                            taken.len()
                        ));
                    }
                    if *taken[0] != fields {
                        return Err(format!(
                            "p = {p}, state = {st}: let chain gives {:?}, execution gives {:?}",
                            taken[0].iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                            fields.iter().map(|v| v.to_string()).collect::<Vec<_>>()
                        ));
                    }
                }
                Err(EvalError::Fault { .. }) => {
                    // A faulting step may feed a let that the chain drops as
                    // dead, so the chain can still complete. The step's own
                    // apply obligation must then fail on this input.
                    stats.faults += 1;
                    if !guards.iter().any(|o| violated(&ev, o, &outer)) {
                        return Err(format!(
                            "p = {p}, state = {st}: execution faults but every apply obligation holds"
                        ));
                    }
                }
                Err(e) => return Err(format!("execution: {e}")),
            }
        }
    }
    Ok(stats)
}

/// One corpus or golden module with its obligations.
pub struct Loaded {
    pub name: String,
    pub module: ModuleDefinition,
    pub obligations: Vec<Obligation>,
}

/// Every `.vdmsl` file under `tests/<dir>`, sorted by name.
pub fn load_dir(dir: &str) -> Vec<Loaded> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(dir);
    let mut paths: Vec<_> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "vdmsl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let src = std::fs::read_to_string(&p).unwrap();
            let g = generate_source(&src, &p.display().to_string(), &PogOptions::default());
            assert!(!g.has_errors(), "{name}: {:?}", g.diagnostics);
            Loaded {
                name,
                module: g.analysis.unwrap().module,
                obligations: g.obligations,
            }
        })
        .collect()
}

/// Bounds small enough to run the whole corpus in a test.
pub fn corpus_bounds() -> Bounds {
    Bounds {
        nat_max: 2,
        int_min: -2,
        int_max: 2,
        seq_len_max: 2,
        set_size_max: 2,
        map_size_max: 2,
        ..Bounds::default()
    }
}

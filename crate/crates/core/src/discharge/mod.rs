//! Bounded exhaustive discharge: every combination of small values for
//! an obligation's outer binds is tried in a fixed order.

mod eval;
mod exec;
mod space;
mod value;

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

pub use eval::{bind_pattern, mark_checked, pattern_assignment, Env, EvalError, Evaluator};
pub use exec::{Outcome, Store};
pub use space::Space;
pub use value::{is_integer, is_zero, Value};

use crate::ast::{ModuleDefinition, Obligation, ObligationStatus, Type};

/// Size limits for enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub nat_max: i64,
    pub int_min: i64,
    pub int_max: i64,
    pub seq_len_max: usize,
    pub set_size_max: usize,
    pub map_size_max: usize,
    pub max_cases: u64,
    pub timeout_ms: u64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            nat_max: 5,
            int_min: -5,
            int_max: 5,
            seq_len_max: 3,
            set_size_max: 3,
            map_size_max: 3,
            max_cases: 10_000,
            timeout_ms: 5_000,
        }
    }
}

impl Bounds {
    /// Checks the field constraints, naming the first one broken.
    pub fn validate(&self) -> Result<(), String> {
        if self.nat_max < 1 {
            return Err("natMax must be positive".into());
        }
        if self.int_max < 1 || self.int_min > self.int_max {
            return Err("intMax must be positive and at least intMin".into());
        }
        if self.seq_len_max < 1 || self.set_size_max < 1 || self.map_size_max < 1 {
            return Err("collection size bounds must be positive".into());
        }
        if self.max_cases < 1 {
            return Err("maxCases must be at least 1".into());
        }
        if self.timeout_ms < 1 {
            return Err("timeoutMs must be positive".into());
        }
        Ok(())
    }

    fn deadline(&self) -> Instant {
        Instant::now() + Duration::from_millis(self.timeout_ms)
    }
}

/// The values of a type within bounds, in enumeration order.
pub struct ValueStream<'m> {
    ev: Evaluator<'m>,
    space: Space,
    next: u128,
}

impl Iterator for ValueStream<'_> {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        while self.next < self.space.len() {
            let v = self.space.get(self.next);
            self.next += 1;
            if self.ev.satisfies_invariants(&v).unwrap_or(false) {
                return Some(mark_checked(v));
            }
        }
        None
    }
}

/// Deterministic enumeration of `t`. Records with invariants only yield
/// members that satisfy them.
pub fn enumerate_values<'m>(t: &Type, b: &Bounds, module: &'m ModuleDefinition) -> Result<ValueStream<'m>, String> {
    let ev = Evaluator::new(module, b.clone(), None);
    let space = space::build(t, b, &ev)?;
    Ok(ValueStream { ev, space, next: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DischargeStatus {
    VerifiedAtBound,
    Failed,
    UncheckedSkipped,
    Exhausted,
}

impl fmt::Display for DischargeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DischargeStatus::VerifiedAtBound => "VerifiedAtBound",
            DischargeStatus::Failed => "Failed",
            DischargeStatus::UncheckedSkipped => "UncheckedSkipped",
            DischargeStatus::Exhausted => "Exhausted",
        })
    }
}

/// Bind names to values, in bind order, with record patterns flattened.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment(pub Vec<(String, Value)>);

impl Assignment {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn env(&self) -> Env {
        Env::from_pairs(self.0.iter().map(|(n, v)| (n.as_str(), v.clone())))
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(n, v)| format!("{n} = {v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (n, v) in &self.0 {
            m.serialize_entry(n, &v.to_string())?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DischargeResult {
    pub ordinal: u32,
    pub status: DischargeStatus,
    pub cases_tried: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Assignment>,
    /// The evaluation fault of a failing case, if it faulted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    /// Why the search stopped early, for `Exhausted`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl DischargeResult {
    fn new(ordinal: u32, status: DischargeStatus, cases_tried: u64) -> DischargeResult {
        DischargeResult {
            ordinal,
            status,
            cases_tried,
            counterexample: None,
            fault: None,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DischargeError {
    #[error("obligation {ordinal}: {message}")]
    Internal { ordinal: u32, message: String },
    #[error("{0}")]
    Bounds(String),
}

/// Tries every combination of the outer binds' values, leftmost varying
/// slowest, until one is false or faults.
pub fn discharge(o: &Obligation, b: &Bounds, module: &ModuleDefinition) -> Result<DischargeResult, DischargeError> {
    if o.status == ObligationStatus::Unchecked {
        return Ok(DischargeResult::new(o.ordinal, DischargeStatus::UncheckedSkipped, 0));
    }
    b.validate().map_err(DischargeError::Bounds)?;
    let ev = Evaluator::new(module, b.clone(), Some(b.deadline()));
    let binds = o.outer_binds();
    let body = o.body_expression();
    let exhausted = |tried: u64, reason: String| {
        let mut r = DischargeResult::new(o.ordinal, DischargeStatus::Exhausted, tried);
        r.reason = Some(reason);
        r
    };
    let internal = |message: String| DischargeError::Internal {
        ordinal: o.ordinal,
        message,
    };
    let mut spaces = Vec::with_capacity(binds.len());
    for bind in binds {
        match space::build(&bind.ty, b, &ev) {
            Ok(s) => spaces.push(s),
            Err(e) => return Ok(exhausted(0, e)),
        }
    }

    let mut tried: u64 = 0;
    let mut outcome: Option<DischargeResult> = None;
    let run = eval::for_each_case(&spaces, &mut |vals| {
        let mut assignment = Vec::new();
        for (bind, v) in binds.iter().zip(vals) {
            if !ev.satisfies_invariants(v)? {
                return Ok(true);
            }
            match pattern_assignment(&bind.pattern, v) {
                Some(a) => assignment.extend(a),
                None => return Ok(true),
            }
        }
        if tried >= b.max_cases {
            outcome = Some(exhausted(tried, "maxCases reached".into()));
            return Ok(false);
        }
        if ev.timed_out() {
            outcome = Some(exhausted(tried, "timeout".into()));
            return Ok(false);
        }
        tried += 1;
        let assignment = Assignment(assignment);
        let failed = |fault: Option<String>| {
            let mut r = DischargeResult::new(o.ordinal, DischargeStatus::Failed, tried);
            r.counterexample = Some(assignment.clone());
            r.fault = fault;
            r
        };
        match ev.evaluate(&body, &assignment.env()) {
            Ok(Value::Bool(true)) => Ok(true),
            Ok(Value::Bool(false)) => {
                outcome = Some(failed(None));
                Ok(false)
            }
            Ok(v) => Err(EvalError::Unsupported(format!(
                "obligation evaluated to non-boolean {v}"
            ))),
            Err(EvalError::Fault { pos, reason }) => {
                outcome = Some(failed(Some(format!("{pos}: {reason}"))));
                Ok(false)
            }
            Err(e) => Err(e),
        }
    });
    match run {
        Ok(()) => {
            Ok(outcome.unwrap_or_else(|| DischargeResult::new(o.ordinal, DischargeStatus::VerifiedAtBound, tried)))
        }
        Err(EvalError::Budget(reason)) => Ok(exhausted(tried, reason)),
        Err(EvalError::Unsupported(m)) => Ok(exhausted(tried, m)),
        Err(e) => Err(internal(e.to_string())),
    }
}

/// Re-evaluates a Failed result's counterexample. True when it is still
/// false, or faults with the recorded reason.
pub fn confirms_failure(o: &Obligation, r: &DischargeResult, b: &Bounds, module: &ModuleDefinition) -> bool {
    let Some(cx) = &r.counterexample else {
        return false;
    };
    let ev = Evaluator::new(module, b.clone(), None);
    match (ev.evaluate(&o.body_expression(), &cx.env()), &r.fault) {
        (Ok(Value::Bool(false)), None) => true,
        (Err(EvalError::Fault { pos, reason }), Some(f)) => *f == format!("{pos}: {reason}"),
        _ => false,
    }
}

/// Results in obligation order with per-status counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub verified: usize,
    pub failed: usize,
    pub unchecked: usize,
    pub exhausted: usize,
    pub results: Vec<DischargeResult>,
}

impl Summary {
    pub fn from_results(results: Vec<DischargeResult>) -> Summary {
        let count = |s: DischargeStatus| results.iter().filter(|r| r.status == s).count();
        Summary {
            total: results.len(),
            verified: count(DischargeStatus::VerifiedAtBound),
            failed: count(DischargeStatus::Failed),
            unchecked: count(DischargeStatus::UncheckedSkipped),
            exhausted: count(DischargeStatus::Exhausted),
            results,
        }
    }

    /// Count and percentage per status, one line each.
    pub fn table(&self) -> String {
        let pct = |n: usize| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total as f64
            }
        };
        let rows = [
            ("VerifiedAtBound", self.verified),
            ("Failed", self.failed),
            ("UncheckedSkipped", self.unchecked),
            ("Exhausted", self.exhausted),
        ];
        let mut out = String::new();
        for (name, n) in rows {
            out.push_str(&format!("{name:<18}{n:>6}{:>8.1}%\n", pct(n)));
        }
        out.push_str(&format!("{:<18}{:>6}\n", "Total", self.total));
        out
    }
}

/// Discharges each obligation on a pool of `jobs` threads. Results keep
/// obligation order.
pub fn discharge_all(
    os: &[Obligation],
    b: &Bounds,
    module: &ModuleDefinition,
    jobs: usize,
) -> Result<Summary, DischargeError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .stack_size(32 << 20)
        .build()
        .map_err(|e| DischargeError::Internal {
            ordinal: 0,
            message: e.to_string(),
        })?;
    let results: Result<Vec<_>, _> = pool.install(|| os.par_iter().map(|o| discharge(o, b, module)).collect());
    Ok(Summary::from_results(results?))
}

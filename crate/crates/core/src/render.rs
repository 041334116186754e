//! VDM-SL concrete syntax for expressions and obligations.
//!
//! Two expression styles exist. `Full` brackets every binary, unary and
//! field-select node, which is how obligation contexts are printed.
//! `Minimal` inserts only the parentheses the grammar needs and is used for
//! the bodies of generated loop functions.

use serde::Serialize;

use crate::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderStyle {
    pub indent_width: usize,
    pub max_line_width: usize,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            indent_width: 2,
            max_line_width: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprStyle {
    Full,
    Minimal,
}

/// Where a subexpression sits relative to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// Delimited on both sides (argument lists, let values, bodies).
    Top,
    Left(u8),
    Right(u8),
    /// Operand of a prefix operator of the given precedence.
    Operand(u8),
    /// Object of an application or field selection.
    Postfix,
}

const ATOM: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Left,
    Right,
    None,
}

fn assoc(op: BinaryOp) -> Assoc {
    use BinaryOp::*;
    match op {
        Implies | Iff => Assoc::Right,
        Eq | Ne | Lt | Gt | Le | Ge | InSet | NotInSet | Subset => Assoc::None,
        _ => Assoc::Left,
    }
}

fn unary_precedence(op: UnaryOp) -> u8 {
    if op == UnaryOp::Not {
        NOT_PRECEDENCE
    } else {
        UNARY_PRECEDENCE
    }
}

struct Printer {
    style: ExprStyle,
}

impl Printer {
    /// Precedence and associativity of the node as printed (bracketed
    /// forms count as atoms).
    fn shape(&self, e: &Expr) -> (u8, Assoc) {
        match (&e.kind, self.style) {
            (ExprKind::Binary { op, .. }, ExprStyle::Minimal) => (op.precedence(), assoc(*op)),
            (ExprKind::Unary { op, .. }, ExprStyle::Minimal) => (unary_precedence(*op), Assoc::None),
            (ExprKind::Override { .. }, _) => (OVERRIDE_PRECEDENCE, Assoc::Left),
            _ => (ATOM, Assoc::None),
        }
    }

    fn needs_parens(&self, e: &Expr, open: bool, slot: Slot) -> bool {
        if slot == Slot::Top {
            return false;
        }
        if open && !matches!(slot, Slot::Right(_)) {
            return true;
        }
        let (prec, a) = self.shape(e);
        let is_override = matches!(e.kind, ExprKind::Override { .. });
        if is_override && self.style == ExprStyle::Full {
            return true;
        }
        match slot {
            Slot::Top => false,
            Slot::Left(p) => prec < p || (prec == p && a != Assoc::Left),
            Slot::Right(p) => prec < p || (prec == p && a != Assoc::Right),
            Slot::Operand(p) => prec < p,
            Slot::Postfix => prec < ATOM,
        }
    }

    fn child(&self, e: &Expr, slot: Slot) -> (String, bool) {
        let (text, open) = self.node(e);
        if self.needs_parens(e, open, slot) {
            (format!("({text})"), false)
        } else {
            (text, open)
        }
    }

    fn text(&self, e: &Expr, slot: Slot) -> String {
        self.child(e, slot).0
    }

    fn list(&self, es: &[Expr]) -> String {
        es.iter()
            .map(|e| self.text(e, Slot::Top))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Renders a node; the flag reports whether the text ends in an open
    /// form (a bare `let ... in body`) that would capture trailing tokens.
    fn node(&self, e: &Expr) -> (String, bool) {
        let full = self.style == ExprStyle::Full;
        match &e.kind {
            ExprKind::Number(n) => (n.clone(), false),
            ExprKind::Bool(b) => (b.to_string(), false),
            ExprKind::Var(v) => (v.clone(), false),
            ExprKind::Old(v) => (format!("{v}~"), false),
            ExprKind::Binary { op, lhs, rhs } => {
                let p = if full { 0 } else { op.precedence() };
                let l = self.text(lhs, Slot::Left(p));
                let (r, open) = self.child(rhs, Slot::Right(p));
                if full {
                    (format!("({l} {} {r})", op.symbol()), false)
                } else {
                    (format!("{l} {} {r}", op.symbol()), open)
                }
            }
            ExprKind::Unary { op, operand } => {
                let p = unary_precedence(*op);
                let (mut inner, mut open) = self.child(operand, Slot::Operand(p));
                if !op.is_word() && inner.starts_with(['-', '+']) {
                    // `--` would start a comment and `++` is override.
                    inner = format!("({inner})");
                    open = false;
                }
                let sep = if op.is_word() { " " } else { "" };
                if full {
                    (format!("({}{sep}{inner})", op.symbol()), false)
                } else {
                    (format!("{}{sep}{inner}", op.symbol()), open)
                }
            }
            ExprKind::Apply { root, args } => (
                format!("{}({})", self.text(root, Slot::Postfix), self.list(args)),
                false,
            ),
            ExprKind::Field { record, field } => {
                let r = self.text(record, Slot::Postfix);
                if full {
                    (format!("({r}.{field})"), false)
                } else {
                    (format!("{r}.{field}"), false)
                }
            }
            ExprKind::MkRecord { name, maximal, args } => (
                format!("mk_{name}{}({})", if *maximal { "!" } else { "" }, self.list(args)),
                false,
            ),
            ExprKind::MkTuple(args) => (format!("mk_({})", self.list(args)), false),
            ExprKind::Mu { record, updates } => {
                let mut s = format!("mu({}", self.text(record, Slot::Top));
                for (f, v) in updates {
                    s.push_str(&format!(", {f} |-> {}", self.text(v, Slot::Top)));
                }
                s.push(')');
                (s, false)
            }
            ExprKind::Override { base, with } => {
                // Override chains associate to the left without brackets.
                let b = match self.node(base) {
                    (t, false) if matches!(base.kind, ExprKind::Override { .. }) => t,
                    _ => self.text(base, Slot::Left(OVERRIDE_PRECEDENCE)),
                };
                let (w, open) = self.child(with, Slot::Right(OVERRIDE_PRECEDENCE));
                (format!("{b} ++ {w}"), open)
            }
            ExprKind::SetEnum(es) => (format!("{{{}}}", self.list(es)), false),
            ExprKind::SeqEnum(es) => (format!("[{}]", self.list(es)), false),
            ExprKind::MapEnum(ms) => {
                if ms.is_empty() {
                    return ("{|->}".to_string(), false);
                }
                let items: Vec<String> = ms
                    .iter()
                    .map(|(k, v)| format!("{} |-> {}", self.text(k, Slot::Top), self.text(v, Slot::Top)))
                    .collect();
                (format!("{{{}}}", items.join(", ")), false)
            }
            ExprKind::Let {
                pattern,
                ty,
                value,
                body,
            } => {
                let v = self.text(value, Slot::Top);
                let b = self.text(body, Slot::Top);
                match ty {
                    Some(t) if full => (
                        format!("(let {} : {} = {v} in {b})", render_pattern(pattern), render_type(t)),
                        false,
                    ),
                    Some(t) => (
                        format!("let {} : {} = {v} in {b}", render_pattern(pattern), render_type(t)),
                        true,
                    ),
                    None => (format!("let {} = {v} in {b}", render_pattern(pattern)), true),
                }
            }
            ExprKind::LetFunctions { defs, body } => {
                let ds: Vec<String> = defs
                    .iter()
                    .map(|d| function_signature_text(d, &self.text(&d.body, Slot::Top)))
                    .collect();
                (format!("let {} in {}", ds.join(", "), self.text(body, Slot::Top)), true)
            }
            ExprKind::Forall { binds, body } => (
                format!("(forall {} & {})", render_binds(binds), self.text(body, Slot::Top)),
                false,
            ),
            ExprKind::If { cond, then, els } => (
                format!(
                    "(if {} then {} else {})",
                    self.text(cond, Slot::Top),
                    self.text(then, Slot::Top),
                    self.text(els, Slot::Top)
                ),
                false,
            ),
        }
    }
}

/// Renders an expression in the given style.
pub fn render_expression_with(e: &Expr, style: ExprStyle) -> String {
    Printer { style }.text(e, Slot::Top)
}

/// Renders an expression in the fully bracketed obligation style.
pub fn render_expression(e: &Expr) -> String {
    render_expression_with(e, ExprStyle::Full)
}

fn full() -> Printer {
    Printer { style: ExprStyle::Full }
}

pub fn render_type(t: &Type) -> String {
    fn inner(t: &Type) -> String {
        match t {
            Type::Product(_) | Type::Map(..) => format!("({})", render_type(t)),
            _ => render_type(t),
        }
    }
    match t {
        Type::Nat => "nat".into(),
        Type::Nat1 => "nat1".into(),
        Type::Int => "int".into(),
        Type::Real => "real".into(),
        Type::Bool => "bool".into(),
        Type::Seq(e) => format!("seq of {}", inner(e)),
        Type::Set(e) => format!("set of {}", inner(e)),
        Type::Map(d, r) => format!("map {} to {}", inner(d), inner(r)),
        Type::Named(n) => n.clone(),
        Type::Product(ts) => ts
            .iter()
            .map(|t| match t {
                Type::Product(_) => format!("({})", render_type(t)),
                _ => render_type(t),
            })
            .collect::<Vec<_>>()
            .join(" * "),
        Type::Any => "?".into(),
    }
}

pub fn render_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Ident(n) => n.clone(),
        Pattern::Record { name, fields } => format!(
            "mk_{name}({})",
            fields.iter().map(render_pattern).collect::<Vec<_>>().join(", ")
        ),
        Pattern::Tuple(ps) => format!("mk_({})", ps.iter().map(render_pattern).collect::<Vec<_>>().join(", ")),
    }
}

pub fn render_binds(binds: &[Bind]) -> String {
    binds
        .iter()
        .map(|b| format!("{}:{}", render_pattern(&b.pattern), render_type(&b.ty)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn signature_head(d: &FunctionDefinition) -> (String, String) {
    let domain = if d.params.is_empty() {
        "()".to_string()
    } else if d.params.len() == 1 {
        render_type(&d.params[0].ty)
    } else {
        render_type(&Type::Product(d.params.iter().map(|p| p.ty.clone()).collect()))
    };
    let arrow = if d.total { "+>" } else { "->" };
    let sig = format!("{}: {domain} {arrow} {}", d.name, render_type(&d.result_type));
    let names: Vec<&str> = d.params.iter().map(|p| p.name.as_str()).collect();
    (sig, format!("{}({}) ==", d.name, names.join(", ")))
}

fn function_signature_text(d: &FunctionDefinition, body: &str) -> String {
    let (sig, head) = signature_head(d);
    let mut s = format!("{sig} {head} {body}");
    if let Some(p) = &d.pre {
        s.push_str(&format!(" pre {}", render_expression(p)));
    }
    s
}

/// Lays out a minimal-style body over several lines, breaking at top-level
/// implications and conjunctions and after `let ... in` when it does not
/// fit in `width` columns.
fn layout_flat(e: &Expr, indent: usize, step: usize, width: usize, out: &mut Vec<String>) {
    let p = Printer {
        style: ExprStyle::Minimal,
    };
    let one_line = p.text(e, Slot::Top);
    let pad = " ".repeat(indent);
    if indent + one_line.len() <= width {
        out.push(format!("{pad}{one_line}"));
        return;
    }
    match &e.kind {
        ExprKind::Binary {
            op: BinaryOp::Implies,
            lhs,
            rhs,
        } => {
            out.push(format!(
                "{pad}{} =>",
                p.text(lhs, Slot::Left(BinaryOp::Implies.precedence()))
            ));
            let (_, open) = p.child(rhs, Slot::Right(BinaryOp::Implies.precedence()));
            if p.needs_parens(rhs, open, Slot::Right(BinaryOp::Implies.precedence())) {
                out.push(format!("{pad}{}({})", " ".repeat(step), p.text(rhs, Slot::Top)));
            } else {
                layout_flat(rhs, indent + step, step, width, out);
            }
        }
        ExprKind::Binary {
            op: BinaryOp::And,
            lhs,
            rhs,
        } if !p.needs_parens(rhs, p.node(rhs).1, Slot::Right(BinaryOp::And.precedence())) => {
            out.push(format!(
                "{pad}{} and",
                p.text(lhs, Slot::Left(BinaryOp::And.precedence()))
            ));
            layout_flat(rhs, indent, step, width, out);
        }
        ExprKind::Let {
            pattern,
            ty: None,
            value,
            body,
        } => {
            out.push(format!(
                "{pad}let {} = {} in",
                render_pattern(pattern),
                p.text(value, Slot::Top)
            ));
            layout_flat(body, indent + step, step, width, out);
        }
        _ => out.push(format!("{pad}{one_line}")),
    }
}

fn inline_function_lines(f: &InlineFunction, indent: usize, style: &RenderStyle, out: &mut Vec<String>) {
    let (sig, head) = signature_head(&f.def);
    let pad = " ".repeat(indent);
    let step = style.indent_width;
    out.push(format!("{pad}{sig}"));
    out.push(format!("{pad}{head}"));
    if f.flat {
        layout_flat(&f.def.body, indent + step, step, style.max_line_width, out);
    } else {
        out.push(format!("{pad}{}{}", " ".repeat(step), render_expression(&f.def.body)));
    }
    if let Some(p) = &f.def.pre {
        out.push(format!("{pad}pre {}", render_expression(p)));
    }
}

/// The text of an obligation's base predicate. Domain predicates use the
/// compact templates of the standard listings.
pub fn render_predicate(o: &Obligation) -> String {
    let p = full();
    let rel = BinaryOp::Eq.precedence();
    let pred = &o.predicate;
    match (&o.kind, &pred.kind) {
        (
            ObligationKind::NonZero,
            ExprKind::Binary {
                op: BinaryOp::Ne,
                lhs,
                rhs,
            },
        ) if matches!(&rhs.kind, ExprKind::Number(n) if n == "0") => {
            format!("{} <> 0", p.text(lhs, Slot::Left(rel)))
        }
        (
            ObligationKind::MapApply | ObligationKind::SeqApply,
            ExprKind::Binary {
                op: BinaryOp::InSet,
                lhs,
                rhs,
            },
        ) => match &rhs.kind {
            ExprKind::Unary {
                op: op @ (UnaryOp::Dom | UnaryOp::Inds),
                operand,
            } => format!(
                "{} in set {} {}",
                p.text(lhs, Slot::Left(rel)),
                op.symbol(),
                p.text(operand, Slot::Operand(UNARY_PRECEDENCE))
            ),
            _ => render_expression(pred),
        },
        (_, ExprKind::Apply { .. })
            if o.context
                .iter()
                .any(|c| matches!(c, ContextClause::InlineFunctions { .. })) =>
        {
            format!("({})", render_expression(pred))
        }
        _ => render_expression(pred),
    }
}

/// Renders the obligation expression (context and predicate) without the
/// header lines.
pub fn render_obligation_body(o: &Obligation, style: &RenderStyle) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut closers = 0usize;
    let mut depth = 0usize;
    let step = style.indent_width;
    let p = full();
    let implies = BinaryOp::Implies.precedence();
    for clause in &o.context {
        let pad = " ".repeat(depth * step);
        match clause {
            ContextClause::ForAll(binds) => {
                if binds.is_empty() {
                    continue;
                }
                lines.push(format!("{pad}(forall {} &", render_binds(binds)));
                closers += 1;
            }
            ContextClause::PreImplication { pre_name, args } => {
                lines.push(format!("{pad}{}({}) =>", pre_name, p.list(args)));
            }
            ContextClause::BranchImplication { cond, negated } => {
                if *negated {
                    lines.push(format!("{pad}(not {} =>", p.text(cond, Slot::Operand(NOT_PRECEDENCE))));
                } else {
                    lines.push(format!("{pad}({} =>", p.text(cond, Slot::Left(implies))));
                }
                closers += 1;
            }
            ContextClause::LetDef { name, ty, value } => {
                lines.push(format!(
                    "{pad}(let {name} : {} = {} in",
                    render_type(ty),
                    p.text(value, Slot::Top)
                ));
                closers += 1;
            }
            ContextClause::LetPattern { pattern, value } => {
                lines.push(format!(
                    "{pad}(let {} = {} in",
                    render_pattern(pattern),
                    p.text(value, Slot::Top)
                ));
                closers += 1;
            }
            ContextClause::LetOldState { name, value } | ContextClause::ResultBinding { name, value } => {
                lines.push(format!("{pad}(let {name} = {} in", p.text(value, Slot::Top)));
                closers += 1;
            }
            ContextClause::InlineFunctions { definitions, .. } => {
                let inner = (depth + 1) * step;
                for (i, f) in definitions.iter().enumerate() {
                    let mut fl = Vec::new();
                    inline_function_lines(f, inner, style, &mut fl);
                    if i == 0 {
                        fl[0] = format!("{pad}let {}", fl[0].trim_start());
                    }
                    if i + 1 < definitions.len() {
                        if let Some(last) = fl.last_mut() {
                            last.push(',');
                        }
                        fl.push(String::new());
                    }
                    lines.extend(fl);
                }
                lines.push(format!("{pad}in"));
            }
        }
        depth += 1;
    }
    let pad = " ".repeat(depth * step);
    lines.push(format!("{pad}{}{}", render_predicate(o), ")".repeat(closers)));
    lines.join("\n")
}

pub fn render_header(o: &Obligation) -> String {
    format!(
        "--Proof Obligation {}: ({})\n{}: {} obligation at line {}:{}",
        o.ordinal,
        o.status,
        o.operation_name,
        o.kind.text(),
        o.location.line,
        o.location.column
    )
}

/// Header lines followed by the obligation expression.
pub fn render_obligation(o: &Obligation, style: &RenderStyle) -> String {
    format!("{}\n{}", render_header(o), render_obligation_body(o, style))
}

/// Renders a list of obligations separated by blank lines.
pub fn render_obligations(os: &[Obligation], style: &RenderStyle) -> String {
    os.iter()
        .map(|o| render_obligation(o, style))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Collapses whitespace runs to single spaces; used to compare listings.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One obligation in the JSON report.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ObligationReport {
    pub ordinal: u32,
    pub operation: String,
    pub kind: ObligationKind,
    pub line: u32,
    pub column: u32,
    pub status: ObligationStatus,
    pub text: String,
    pub file: String,
}

pub fn obligation_report(o: &Obligation, style: &RenderStyle) -> ObligationReport {
    ObligationReport {
        ordinal: o.ordinal,
        operation: o.operation_name.clone(),
        kind: o.kind,
        line: o.location.line,
        column: o.location.column,
        status: o.status,
        text: render_obligation(o, style),
        file: o.location.file.to_string(),
    }
}

/// The JSON array of obligation reports.
pub fn render_json(os: &[Obligation], style: &RenderStyle) -> String {
    let reports: Vec<ObligationReport> = os.iter().map(|o| obligation_report(o, style)).collect();
    serde_json::to_string_pretty(&reports).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_expression, Dialect};

    fn e(src: &str) -> Expr {
        parse_expression(src, Dialect::Obligation).unwrap()
    }

    #[test]
    fn stacked_signs_do_not_merge_into_other_tokens() {
        for src in ["+ +a", "- -a", "+ -a", "- +a"] {
            let x = e(src);
            for style in [ExprStyle::Full, ExprStyle::Minimal] {
                let out = render_expression_with(&x, style);
                assert_eq!(e(&out), x, "{src} rendered as {out}");
            }
        }
    }

    #[test]
    fn full_style_brackets_operators() {
        assert_eq!(render_expression(&e("sv - a")), "(sv - a)");
        assert_eq!(
            render_expression(&e("key <> 0 and isValid(key)")),
            "((key <> 0) and isValid(key))"
        );
        assert_eq!(
            render_expression(&e("count + len s = len data")),
            "((count + (len s)) = (len data))"
        );
        assert_eq!(
            render_expression(&e("let s = mk_Sigma!(sv, xv) in s.sv <> s.xv")),
            "let s = mk_Sigma!(sv, xv) in ((s.sv) <> (s.xv))"
        );
    }

    #[test]
    fn override_stays_bare_at_top() {
        assert_eq!(
            render_expression(&e("sv ++ {1 |-> mu(sv(1), size |-> 456)}")),
            "sv ++ {1 |-> mu(sv(1), size |-> 456)}"
        );
        assert_eq!(render_expression(&e("len (a ++ b)")), "(len (a ++ b))");
        assert_eq!(render_expression(&e("a ++ (b ++ c)")), "a ++ (b ++ c)");
        assert_eq!(render_expression(&e("(a ++ b) ++ c")), "a ++ b ++ c");
    }

    #[test]
    fn minimal_style_matches_loop_body() {
        let src = "s <> [] => invariant(s, count, data) and let mk_(s, count) = body(s, count) in invariant(s, count, data) and loop(s, count, data)";
        assert_eq!(render_expression_with(&e(src), ExprStyle::Minimal), src);
    }

    #[test]
    fn minimal_style_keeps_needed_parens() {
        for src in [
            "(a + b) * c",
            "a - (b - c)",
            "(a => b) => c",
            "not (a and b)",
            "(let x = 1 in x) + 2",
            "- -x",
            "(len s).f",
            "(a = b) = c",
        ] {
            let r = render_expression_with(&e(src), ExprStyle::Minimal);
            assert_eq!(e(&r), e(src), "{src} rendered as {r}");
        }
    }

    #[test]
    fn open_forms_are_closed_before_operators() {
        let t = Expr::binary(BinaryOp::Add, e("let x = 1 in x"), e("2"), Pos::default());
        assert_eq!(render_expression(&t), "((let x = 1 in x) + 2)");
        assert_eq!(e(&render_expression(&t)), t);
    }

    #[test]
    fn types_render_with_needed_brackets() {
        assert_eq!(
            render_type(&Type::Product(vec![Type::seq(Type::Int), Type::Int])),
            "seq of int * int"
        );
        assert_eq!(
            render_type(&Type::seq(Type::map(Type::Nat, Type::Named("R".into())))),
            "seq of (map nat to R)"
        );
    }
}

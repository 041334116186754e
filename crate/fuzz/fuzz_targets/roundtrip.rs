#![no_main]

//! Any expression that parses must render to text that parses back to
//! the same tree, in both rendering styles.

use libfuzzer_sys::fuzz_target;
use vdm_pog::frontend::{parse_expression, Dialect};
use vdm_pog::render::{render_expression_with, ExprStyle};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(e) = parse_expression(text, Dialect::Obligation) else {
        return;
    };
    for style in [ExprStyle::Full, ExprStyle::Minimal] {
        let out = render_expression_with(&e, style);
        let back = parse_expression(&out, Dialect::Obligation)
            .unwrap_or_else(|err| panic!("{out:?} does not reparse: {err:?}"));
        assert_eq!(back, e, "{out}");
    }
});

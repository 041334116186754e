#![no_main]

//! Whole pipeline: every obligation generated from a module that passes
//! analysis must render to a parseable closed expression.

use libfuzzer_sys::fuzz_target;
use vdm_pog::driver::generate_source;
use vdm_pog::frontend::{parse_expression, Dialect};
use vdm_pog::pog::PogOptions;
use vdm_pog::render::render_expression;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let g = generate_source(text, "fuzz.vdmsl", &PogOptions::default());
    for o in &g.obligations {
        let out = render_expression(&o.to_expression());
        if let Err(err) = parse_expression(&out, Dialect::Obligation) {
            panic!("obligation {} does not reparse: {err:?}\n{out}", o.ordinal);
        }
    }
});

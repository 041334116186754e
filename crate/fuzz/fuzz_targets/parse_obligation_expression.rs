#![no_main]

use libfuzzer_sys::fuzz_target;
use vdm_pog::frontend::{parse_expression, Dialect};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_expression(text, Dialect::Obligation);
        let _ = parse_expression(text, Dialect::Source);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use vdm_pog::ast::Pos;
use vdm_pog::frontend::{tokenize_with, Dialect};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for dialect in [Dialect::Source, Dialect::Obligation] {
            let _ = tokenize_with(text, "fuzz.vdmsl", dialect, Pos::new(1, 1));
        }
    }
});

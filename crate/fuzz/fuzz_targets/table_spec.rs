//! Table-model spec files come from the command line (`mock:table:<path>`),
//! so the JSON decoder must reject malformed specs gracefully. Whatever
//! loads must answer conditionals without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;
use llmp::backend::TableLM;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = TableLM::from_json(text) {
        use llmp::backend::TokenConditional;
        if let Ok(dist) = table.conditional("1, 2.5\n3, ") {
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-6, "unnormalized distribution");
        }
    }
});

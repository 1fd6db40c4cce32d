//! JSONL dataset loader on arbitrary bytes: parse errors must be reported,
//! never panic, and whatever parses must convert to train/target sets
//! without panicking either.

#![no_main]

use libfuzzer_sys::fuzz_target;
use llmp::harness::parse_jsonl;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(loaded) = parse_jsonl(text) {
        let _ = loaded.clone().into_training_set();
        let _ = loaded.into_target_set();
    }
});

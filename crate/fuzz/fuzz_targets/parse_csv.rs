#![no_main]

use libfuzzer_sys::fuzz_target;
use llmp::harness::parse_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(loaded) = parse_csv(data) {
        let _ = loaded.clone().into_training_set();
        let _ = loaded.into_target_set();
    }
});

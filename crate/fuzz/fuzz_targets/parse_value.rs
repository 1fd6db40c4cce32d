//! Numeric parsing of arbitrary model output. Accepted values must always be
//! finite under both sign conventions.

#![no_main]

use libfuzzer_sys::fuzz_target;
use llmp::numcodec::{parse_value, NumericFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let signed = NumericFormat::new(2);
    let unsigned = NumericFormat {
        precision: 2,
        allow_negative: false,
    };
    if let Ok(v) = parse_value(text, &signed) {
        assert!(v.is_finite());
    }
    if let Ok(v) = parse_value(text, &unsigned) {
        assert!(v.is_finite());
        assert!(v >= 0.0);
    }
});

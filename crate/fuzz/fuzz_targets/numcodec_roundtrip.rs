//! Serialize/parse round trip: any finite value at any small precision must
//! serialize, parse back to exactly its rounded value, and re-serialize to
//! the identical canonical string.

#![no_main]

use libfuzzer_sys::fuzz_target;
use llmp::numcodec::{parse_value, round_to, serialize_value, NumericFormat};

fuzz_target!(|data: &[u8]| {
    if data.len() < 9 {
        return;
    }
    let bits = u64::from_le_bytes(data[..8].try_into().unwrap());
    let y = f64::from_bits(bits);
    if !y.is_finite() || y.abs() > 1e12 {
        return;
    }
    let fmt = NumericFormat::new((data[8] % 5) as u32);
    let s = serialize_value(y, &fmt).expect("finite values serialize");
    let back = parse_value(s.as_str(), &fmt).expect("canonical strings parse");
    assert_eq!(back, round_to(y, fmt.precision));
    let again = serialize_value(back, &fmt).expect("round-tripped values serialize");
    assert_eq!(s, again, "canonical form must be a fixed point");
});

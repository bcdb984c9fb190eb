//! Model JSON: accepted models must survive a canonical round trip.
#![no_main]

use condgauss::io::{canonical_json, parse_model_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = parse_model_json(text) {
            let again = canonical_json(&model).expect("valid model serializes");
            assert_eq!(parse_model_json(&again).expect("canonical form parses"), model);
        }
    }
});

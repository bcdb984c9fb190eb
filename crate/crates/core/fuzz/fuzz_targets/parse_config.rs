//! Flat key-value configs: parsing and model construction must not panic.
#![no_main]

use condgauss::io::{model_from_flat, parse_flat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mut cfg) = parse_flat(text) {
            let _ = model_from_flat(&mut cfg);
        }
    }
});

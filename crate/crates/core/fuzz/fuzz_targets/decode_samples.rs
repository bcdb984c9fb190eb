//! Binary sample files: decoded files must re-encode to the same bytes.
#![no_main]

use condgauss::io::{decode_samples, encode_samples};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((header, values)) = decode_samples(data) {
        assert_eq!(encode_samples(&header, &values).expect("decoded header is valid"), data);
    }
});

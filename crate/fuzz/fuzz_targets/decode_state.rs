#![no_main]

use libfuzzer_sys::fuzz_target;
use tdse2d::scans::formats::{decode_state, encode_state};

fuzz_target!(|data: &[u8]| {
    if let Ok(psi) = decode_state(data) {
        assert_eq!(encode_state(&psi), data);
    }
});

//! Decoding never panics or over-allocates; accepted input re-encodes to the
//! same bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;
use tdse2d::scans::formats::{decode_snapshot, encode_snapshot};

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = decode_snapshot(data) {
        assert_eq!(encode_snapshot(&snap), data);
        let _ = snap.anisotropy();
    }
});

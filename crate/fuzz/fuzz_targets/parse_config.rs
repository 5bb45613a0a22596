//! Config text must parse or fail cleanly, and anything accepted must survive
//! a write/parse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use tdse2d::scans::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.to_text()).expect("resolved config re-parses");
        assert_eq!(cfg, again);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tdse2d::scans::formats::{parse_series_csv, series_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = parse_series_csv(text) {
        assert!(file.series.is_consistent());
        let written = series_to_csv(&file.series, &[]);
        let back = parse_series_csv(&written).expect("written series re-parses");
        assert_eq!(back.series.len(), file.series.len());
    }
});

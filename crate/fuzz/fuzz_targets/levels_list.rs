#![no_main]

use libfuzzer_sys::fuzz_target;
use ndp::io::parse_levels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(levels) = parse_levels(text) {
        assert!(levels.windows(2).all(|w| w[0] < w[1]));
    }
});

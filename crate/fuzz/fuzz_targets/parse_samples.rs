#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::features::parse_samples;

// Input: layout.json and features.csv separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Some((layout, features)) = text.split_once('\0') else { return };
    let Ok((train, test)) = parse_samples(layout, features) else { return };
    for w in train.iter().chain(test.iter()) {
        assert_eq!(w.lookback_len(), train.lookback);
        assert!(w.target.is_finite());
    }
});

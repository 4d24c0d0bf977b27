#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::models::parse_streams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(streams) = parse_streams(text) else { return };
    for s in &streams {
        assert_eq!(parse_streams(&s.to_csv()).unwrap(), vec![s.clone()]);
    }
});

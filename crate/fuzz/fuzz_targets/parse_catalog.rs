#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::catalog::{parse_catalog, write_catalog};

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = parse_catalog(data) else { return };
    // whatever was accepted must survive a write and re-read unchanged
    let mut text = Vec::new();
    write_catalog(&parsed.events, &mut text).unwrap();
    let again = parse_catalog(text.as_slice()).unwrap();
    assert_eq!(again.events, parsed.events);
    assert_eq!(again.skipped, 0);
});

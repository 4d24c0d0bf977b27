#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::gridding::BinSeriesSet;

// Input: meta.json, values.csv and counts.csv separated by NUL bytes.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut parts = text.splitn(3, '\0');
    let (Some(meta), Some(values), Some(counts)) = (parts.next(), parts.next(), parts.next()) else { return };
    if let Ok(set) = BinSeriesSet::from_parts(meta, values, counts) {
        assert_eq!(set.values.len(), set.active_bins.len());
        assert!(set.values.iter().all(|row| row.len() == set.n_periods()));
    }
});

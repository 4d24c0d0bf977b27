#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::catalog::RegionFilter;
use quakecast::features::FeatureSpec;
use quakecast::models::{ModelDescriptor, TrainConfig};
use quakecast::nowcast::{FilterGrid, NowcastFilterParams};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(region) = serde_json::from_str::<RegionFilter>(text) {
        let _ = region.validate();
    }
    if let Ok(spec) = serde_json::from_str::<FeatureSpec>(text) {
        let _ = spec.validate(14);
    }
    if let Ok(params) = serde_json::from_str::<NowcastFilterParams>(text) {
        let _ = params.validate();
    }
    let _ = serde_json::from_str::<FilterGrid>(text);
    if let Ok(desc) = serde_json::from_str::<ModelDescriptor>(text) {
        if desc.validate().is_ok() {
            let _ = desc.param_count();
        }
    }
    let _ = serde_json::from_str::<TrainConfig>(text);
});

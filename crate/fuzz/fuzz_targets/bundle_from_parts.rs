#![no_main]

use libfuzzer_sys::fuzz_target;
use quakecast::models::ModelBundle;
use sha2::{Digest, Sha256};

// Input: bundle.json and params.bin separated by a NUL byte. The manifest
// digest is rewritten to match so the fuzzer gets past the checksum.
fuzz_target!(|data: &[u8]| {
    let Some(cut) = data.iter().position(|&b| b == 0) else { return };
    let (json, params) = (&data[..cut], &data[cut + 1..]);
    let Ok(text) = std::str::from_utf8(json) else { return };
    let _ = ModelBundle::from_parts(text, params);

    let Ok(mut manifest) = serde_json::from_str::<serde_json::Value>(text) else { return };
    let Some(obj) = manifest.as_object_mut() else { return };
    obj.insert("params_sha256".into(), hex::encode(Sha256::digest(params)).into());
    let Ok(bundle) = ModelBundle::from_parts(&manifest.to_string(), params) else { return };
    let (json, bytes) = bundle.encode().unwrap();
    assert_eq!(ModelBundle::from_parts(&json, &bytes).unwrap(), bundle);
});

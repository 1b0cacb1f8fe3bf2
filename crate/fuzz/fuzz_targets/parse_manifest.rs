//! A manifest that parses must serialize and parse back to itself.

#![no_main]

use graspsense::dataset::DatasetManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(manifest) = DatasetManifest::from_json(data) else {
        return;
    };
    let text = manifest.to_json().expect("parsed manifest serializes");
    let back = DatasetManifest::from_json(text.as_bytes()).expect("reparse");
    assert_eq!(back.to_json().expect("serializes"), text);
});

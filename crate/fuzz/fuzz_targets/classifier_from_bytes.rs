#![no_main]

use graspsense::models::MaterialClassifier;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = MaterialClassifier::from_bytes(data);
});

//! Motion likelihood tables loaded next to the classifier.

#![no_main]

use graspsense::active::MotionLikelihoodModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = MotionLikelihoodModel::from_json(text);
    }
});

#![no_main]

use graspsense::models::SlipPredictor;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = SlipPredictor::from_bytes(data);
});

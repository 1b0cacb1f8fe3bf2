#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = graspsense::dataset::parse_tactile_csv(data);
});

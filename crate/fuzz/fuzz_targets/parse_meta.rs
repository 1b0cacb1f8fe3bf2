//! Trial metadata JSON. Must reject, not panic, on anything malformed.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = graspsense::dataset::parse_meta(data);
});

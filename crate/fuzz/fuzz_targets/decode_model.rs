//! The container is strict (checksum, no trailing bytes), so anything it
//! accepts re-encodes to the same bytes.

#![no_main]

use graspsense::models::{decode_model, encode_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(blob) = decode_model(data) {
        assert_eq!(encode_model(&blob), data);
    }
});

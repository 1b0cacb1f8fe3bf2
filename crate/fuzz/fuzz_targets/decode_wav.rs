//! Arbitrary bytes as a trial's audio file.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(w) = graspsense::dsp::decode_wav(data) {
        assert!(w.samples().iter().all(|x| (-1.0..=1.0).contains(x)));
    }
});

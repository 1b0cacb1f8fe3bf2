//! Command-line names: materials, motions, splits and episode policies.
//! Each accepted name prints back to something that parses to the same value.

#![no_main]

use std::fmt::Display;
use std::str::FromStr;

use graspsense::controller::{EpisodePolicy, MotionKind};
use graspsense::dataset::Split;
use graspsense::Material;
use libfuzzer_sys::fuzz_target;

fn round_trip<T>(s: &str)
where
    T: FromStr + Display + PartialEq + std::fmt::Debug,
{
    if let Ok(v) = s.parse::<T>() {
        let back = v.to_string().parse::<T>().ok();
        assert_eq!(back.as_ref(), Some(&v), "{s:?}");
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    round_trip::<Material>(s);
    round_trip::<MotionKind>(s);
    round_trip::<Split>(s);
    round_trip::<EpisodePolicy>(s);
});

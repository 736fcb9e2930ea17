//! Short textual names accepted on the command line.

#![no_main]

use emsound::forward::{Orientation, Orientations, Units};
use emsound::harness::{Preset, TestProfile};
use emsound::regularize::OperatorKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = s.parse::<TestProfile>() {
        assert_eq!(p.to_string().parse::<TestProfile>().unwrap(), p);
    }
    if let Ok(p) = s.parse::<Preset>() {
        assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
    }
    let _ = s.parse::<Orientation>();
    let _ = s.parse::<Orientations>();
    let _ = s.parse::<Units>();
    let _ = s.parse::<OperatorKind>();
});

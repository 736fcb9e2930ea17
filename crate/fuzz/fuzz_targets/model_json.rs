#![no_main]

use emsound::forward::{forward_map, InstrumentSetup, LayeredEarthModel, Orientations};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = LayeredEarthModel::from_json_str(text) else { return };
    let again = LayeredEarthModel::from_json_str(&model.to_json_string()).expect("serialized model parses");
    assert_eq!(model, again);
    // the forward map may reject extreme models but must not panic
    if model.n_layers() <= 16 {
        let setup = InstrumentSetup::new(vec![0.0, 1.0], Orientations::Both).unwrap();
        if let Ok(b) = forward_map(&model, &setup) {
            assert!(b.iter().all(|v| v.is_finite()));
        }
    }
});

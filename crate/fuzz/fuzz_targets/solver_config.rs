#![no_main]

use emsound::solver::SolverConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = SolverConfig::from_json_str(text) else { return };
    let again = SolverConfig::from_json_str(&config.to_json_string()).expect("serialized config parses");
    assert_eq!(config, again);
});

//! Replays the checked-in fuzz seeds through the same invariants the fuzz
//! targets assert, so they hold on the stable toolchain too.

use std::fs;
use std::path::PathBuf;

use emsound::forward::{LayeredEarthModel, SoundingData, Units};
use emsound::hankel::{HankelFilter, HankelOrder};
use emsound::harness::{Preset, TestProfile};
use emsound::solver::SolverConfig;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn filter_table_seeds() {
    for (name, bytes) in seeds("filter_table") {
        let text = String::from_utf8(bytes).unwrap();
        let order = if name.contains("j1") { HankelOrder::One } else { HankelOrder::Zero };
        let filter = HankelFilter::parse_table(&text, order, &name).unwrap();
        // the seeds are the built-in table in text form
        let builtin = HankelFilter::builtin(order);
        assert_eq!(filter.abscissas(), builtin.abscissas(), "{name}");
        assert_eq!(filter.weights(), builtin.weights(), "{name}");
    }
}

#[test]
fn model_json_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("model_json") {
        let Ok(model) = LayeredEarthModel::from_json_str(std::str::from_utf8(&bytes).unwrap()) else {
            continue;
        };
        accepted += 1;
        assert_eq!(LayeredEarthModel::from_json_str(&model.to_json_string()).unwrap(), model, "{name}");
    }
    assert!(accepted >= 3);
}

#[test]
fn data_csv_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("data_csv") {
        let Ok((setup, data)) = SoundingData::read_csv(bytes.as_slice(), Units::SiemensPerMeter) else {
            continue;
        };
        accepted += 1;
        let mut buf = Vec::new();
        data.write_csv(&setup, &mut buf, Units::SiemensPerMeter).unwrap();
        let (setup2, again) = SoundingData::read_csv(buf.as_slice(), Units::SiemensPerMeter).unwrap();
        assert_eq!(setup.heights(), setup2.heights(), "{name}");
        assert_eq!(data.b, again.b, "{name}");
    }
    assert!(accepted >= 2);
}

#[test]
fn solver_config_seeds() {
    for (name, bytes) in seeds("solver_config") {
        let config = SolverConfig::from_json_str(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(SolverConfig::from_json_str(&config.to_json_string()).unwrap(), config, "{name}");
    }
}

#[test]
fn name_seeds() {
    for (name, bytes) in seeds("names") {
        let s = String::from_utf8(bytes).unwrap();
        if let Ok(p) = s.parse::<TestProfile>() {
            assert_eq!(p.to_string().parse::<TestProfile>().unwrap(), p, "{name}");
        }
        if let Ok(p) = s.parse::<Preset>() {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p, "{name}");
        }
    }
}

#![no_main]

use emsound::forward::{SoundingData, Units};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok((setup, sounding)) = SoundingData::read_csv(data, Units::SiemensPerMeter) else { return };
    assert_eq!(sounding.b.len(), setup.n_data());
    let mut buf = Vec::new();
    sounding.write_csv(&setup, &mut buf, Units::SiemensPerMeter).expect("accepted data writes");
    let (setup2, again) = SoundingData::read_csv(buf.as_slice(), Units::SiemensPerMeter).expect("written data parses");
    assert_eq!(setup.heights(), setup2.heights());
    assert_eq!(sounding.b, again.b);
});

//! Hankel filter tables: parsing must never panic, and an accepted table
//! must already satisfy the closed-form checks.

#![no_main]

use emsound::hankel::{HankelFilter, HankelOrder};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for order in [HankelOrder::Zero, HankelOrder::One] {
        if let Ok(filter) = HankelFilter::parse_table(text, order, "fuzz") {
            assert_eq!(filter.abscissas().len(), filter.weights().len());
            assert!(filter.validate().is_ok());
        }
    }
});

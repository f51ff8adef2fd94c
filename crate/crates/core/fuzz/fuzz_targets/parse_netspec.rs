#![no_main]

use libfuzzer_sys::fuzz_target;
use pipenet_core::netspec::{parse, render};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse(text) {
        // Canonical rendering must parse back to the same description.
        let again = parse(&render(&spec)).expect("rendered spec failed to parse");
        assert_eq!(render(&again), render(&spec));
    }
});

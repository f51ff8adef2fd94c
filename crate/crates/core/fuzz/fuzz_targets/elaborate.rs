#![no_main]

use libfuzzer_sys::fuzz_target;
use pipenet_core::netspec::{elaborate, parse};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse(text) {
        let _ = elaborate(&spec);
    }
});

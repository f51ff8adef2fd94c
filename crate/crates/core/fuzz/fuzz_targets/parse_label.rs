#![no_main]

use libfuzzer_sys::fuzz_target;
use pipenet_core::interconnect::PortRef;
use pipenet_core::SignalLabel;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(label) = s.parse::<SignalLabel>() {
        assert_eq!(label.to_string().parse::<SignalLabel>().unwrap(), label);
    }
    let _ = s.parse::<PortRef>();
});

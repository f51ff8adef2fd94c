#![no_main]

use libfuzzer_sys::fuzz_target;
use pipenet_core::simulate::TimeSeries;

fuzz_target!(|data: &[u8]| {
    if let Ok(ts) = TimeSeries::read_csv(data) {
        let mut buf = Vec::new();
        ts.write_csv(&mut buf, 17).unwrap();
        assert_eq!(TimeSeries::read_csv(buf.as_slice()).unwrap(), ts);
    }
});

//! Replays the checked-in fuzz corpus through the same properties the fuzz
//! targets assert, so the seeds stay valid on stable toolchains.

use std::fs;
use std::path::{Path, PathBuf};

use pipenet_core::netspec::{elaborate, parse, render};
use pipenet_core::simulate::TimeSeries;
use pipenet_core::SignalLabel;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn netspec_seeds_round_trip() {
    let mut parsed = 0;
    for (path, bytes) in seeds("parse_netspec") {
        let text = String::from_utf8(bytes).unwrap();
        if let Ok(spec) = parse(&text) {
            let again = parse(&render(&spec)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(render(&again), render(&spec), "{}", path.display());
            parsed += 1;
        }
    }
    assert!(parsed >= 4);
}

#[test]
fn elaborate_seeds_build() {
    for (path, bytes) in seeds("elaborate") {
        let spec = parse(std::str::from_utf8(&bytes).unwrap()).unwrap();
        elaborate(&spec).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn label_seeds_round_trip() {
    for (_, bytes) in seeds("parse_label") {
        let s = String::from_utf8(bytes).unwrap();
        if let Ok(label) = s.parse::<SignalLabel>() {
            assert_eq!(label.to_string().parse::<SignalLabel>().unwrap(), label);
        }
    }
}

#[test]
fn csv_seeds_round_trip() {
    for (path, bytes) in seeds("timeseries_csv") {
        let ts = TimeSeries::read_csv(bytes.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut buf = Vec::new();
        ts.write_csv(&mut buf, 17).unwrap();
        assert_eq!(TimeSeries::read_csv(buf.as_slice()).unwrap(), ts);
    }
}

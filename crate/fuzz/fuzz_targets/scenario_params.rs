#![no_main]

use idepcag::scenarios::{CookeYorkeParams, GeometricParams, ProductParams, SineParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let mut s1 = GeometricParams::default();
    let mut s2 = ProductParams::default();
    let mut s3 = CookeYorkeParams::default();
    let mut s4 = SineParams::default();
    for line in src.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let _ = s1.set(key, value);
        let _ = s2.set(key, value);
        let _ = s3.set(key, value);
        let _ = s4.set(key, value);
    }
});

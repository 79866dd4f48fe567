#![no_main]

use idepcag::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_json(src) else {
        return;
    };
    let _ = cfg.system();
    RunConfig::from_json(&cfg.to_json()).expect("serialised config parses");
});

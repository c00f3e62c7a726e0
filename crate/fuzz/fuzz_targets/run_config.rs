#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = epn::config::RunConfig::from_json(text) {
        // anything accepted must survive its own serialization
        let again = epn::config::RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again.hash(), cfg.hash());
    }
});

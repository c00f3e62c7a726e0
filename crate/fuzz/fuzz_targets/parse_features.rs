#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let [n, f, body @ ..] = data else { return };
    let Ok(text) = std::str::from_utf8(body) else { return };
    let (n, f) = (*n as usize % 64, *f as usize % 16);
    if let Ok(x) = epn::graph::parse_features(text, n, f) {
        assert_eq!((x.rows(), x.cols()), (n, f));
        assert!(x.as_slice().iter().all(|v| v.is_finite()));
    }
});

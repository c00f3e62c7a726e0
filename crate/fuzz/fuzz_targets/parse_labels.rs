#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let [n, c, body @ ..] = data else { return };
    let Ok(text) = std::str::from_utf8(body) else { return };
    let (n, c) = (*n as usize, *c as usize % 32);
    if let Ok(labels) = epn::graph::parse_labels(text, n, c) {
        assert_eq!(labels.len(), n);
        assert!(labels.iter().flatten().all(|&y| y < c));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

// First byte picks the node count, the rest is the file body.
fuzz_target!(|data: &[u8]| {
    let Some((&n, body)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(body) else { return };
    let n = n as usize;
    if let Ok(edges) = epn::graph::parse_edges(text, n) {
        assert!(edges.iter().all(|&(u, v)| u < n && v < n));
    }
});

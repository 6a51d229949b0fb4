#![no_main]

use libfuzzer_sys::fuzz_target;
use rgglab::graph::{decode_edge_list, encode_edge_list};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = decode_edge_list(text) {
        let again = decode_edge_list(&encode_edge_list(&g)).expect("encoded graph decodes");
        assert_eq!(again.n(), g.n());
        assert!(again.edges().eq(g.edges()));
    }
});

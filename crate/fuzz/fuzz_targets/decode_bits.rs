#![no_main]

use libfuzzer_sys::fuzz_target;
use rgglab::graph::{decode_bits, encode_bits};

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = decode_bits(data) {
        let again = decode_bits(&encode_bits(&g)).expect("encoded graph decodes");
        assert_eq!(again.n(), g.n());
        assert!(again.edges().eq(g.edges()));
    }
});

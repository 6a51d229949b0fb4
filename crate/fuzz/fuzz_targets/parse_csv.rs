#![no_main]

use libfuzzer_sys::fuzz_target;
use rgglab::harness::{emit_csv, parse_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_csv(text) {
        // writing is a fixed point after one round
        let Ok(first) = emit_csv(&records) else {
            return;
        };
        let reread = parse_csv(&first).expect("written csv parses");
        assert_eq!(emit_csv(&reread).expect("rewrite"), first);
    }
});

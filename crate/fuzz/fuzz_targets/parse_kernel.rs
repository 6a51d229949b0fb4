#![no_main]

use libfuzzer_sys::fuzz_target;
use rgglab::graph::ModelKernel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(k) = text.parse::<ModelKernel>() {
        // printed form parses back to the same kernel
        let again: ModelKernel = k.to_string().parse().expect("display output parses");
        assert_eq!(again, k);
    }
});

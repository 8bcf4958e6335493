#![no_main]
use libfuzzer_sys::fuzz_target;

// First byte picks the alphabet size; the rest is the pool/request text.
fuzz_target!(|data: &[u8]| {
    let Some((&a, rest)) = data.split_first() else { return };
    if let Ok(text) = std::str::from_utf8(rest) {
        let alphabet = u32::from(a) + 1;
        let _ = ecosim::instance::parse_pool_spec(text, alphabet);
        let _ = ecosim::instance::parse_request_spec(text, alphabet);
    }
});

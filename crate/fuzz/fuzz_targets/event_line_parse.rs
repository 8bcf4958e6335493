#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(e) = ecosim::ecosystem::parse_event_line(text) {
            assert_eq!(ecosim::ecosystem::parse_event_line(&e.to_line()).unwrap(), e);
        }
        let _ = ecosim::ecosystem::parse_jsonl(text);
    }
});

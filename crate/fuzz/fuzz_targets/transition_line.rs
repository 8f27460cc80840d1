#![no_main]

use libfuzzer_sys::fuzz_target;
use rbwe::dataset::{parse_transition_line, read_transitions};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = parse_transition_line(text) {
            assert!(t.validate().is_ok());
        }
    }
    let _ = read_transitions(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use rbwe::dataset::CapacityTrace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = CapacityTrace::from_json(text) {
        let end = trace.duration_ms();
        let _ = trace.capacity_at(end / 2);
        let _ = trace.mean_capacity(0, end);
        let again = CapacityTrace::from_json(&trace.to_json().unwrap()).expect("round trip");
        assert_eq!(again, trace);
    }
});

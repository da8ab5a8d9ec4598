#![no_main]

use libfuzzer_sys::fuzz_target;
use vegnav::bench::parse_scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_scenario(text);
    }
});

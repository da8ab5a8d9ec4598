#![no_main]

use libfuzzer_sys::fuzz_target;
use vegnav::io::{format_trajectory, parse_trajectory};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(samples) = parse_trajectory(text) {
        // Times stay strictly increasing through a round trip.
        let again = parse_trajectory(&format_trajectory(&samples)).expect("formatted trajectory parses");
        assert_eq!(samples.len(), again.len());
    }
});

//! Point cloud text must parse or fail cleanly, and whatever parses must
//! survive a format/parse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use vegnav::io::{format_point_cloud, parse_point_cloud};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_point_cloud(text) {
        let again = parse_point_cloud(&format_point_cloud(&points)).expect("formatted cloud parses");
        assert_eq!(points, again);
    }
});

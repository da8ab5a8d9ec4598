#![no_main]

use libfuzzer_sys::fuzz_target;
use vegnav::world::parse_world_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = parse_world_spec(text) {
            // Accepted specs describe a valid world.
            let _ = spec.world();
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tabsynth::design_space::parse_space;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything that parses must survive its own rendering.
    if let Ok(space) = parse_space(text) {
        let again = parse_space(&space.to_document()).expect("rendered space reparses");
        assert_eq!(again.to_document(), space.to_document());
    }
});

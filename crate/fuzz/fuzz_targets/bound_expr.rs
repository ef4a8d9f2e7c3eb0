#![no_main]

use libfuzzer_sys::fuzz_target;
use tabsynth::design_space::parse_space;

// Bound expressions are only reachable through a space document, so the
// input becomes the lower and upper bound of a feature that may reference
// two earlier ones.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if text.contains(['\n', '\r', '|', '#']) {
        return;
    }
    let (lower, upper) = text.split_once(';').unwrap_or((text, text));
    let doc = format!(
        "space fuzz\nversion 1\n\
         a | continuous | 1 | 10 | - | uniform |\n\
         n | integer | 2 | 20 | - | uniform |\n\
         x | continuous | {lower} | {upper} | - | uniform |\n"
    );
    if let Ok(space) = parse_space(&doc) {
        let _ = space.resolve_bounds(&[5.0, 12.0, 0.0], 2);
        let _ = space.denormalize(&[0.5, 0.5, 0.5]);
        parse_space(&space.to_document()).expect("rendered space reparses");
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use tabsynth::annotate::Dataset;

// Input is the CSV text and the sidecar JSON separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Some((csv, sidecar)) = text.split_once('\0') else {
        return;
    };
    if let Ok(ds) = Dataset::from_parts(csv, sidecar) {
        let _ = ds.to_csv_string().expect("checked dataset writes");
        let _ = ds.test_names();
    }
});

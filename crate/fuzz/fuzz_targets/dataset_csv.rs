#![no_main]

use libfuzzer_sys::fuzz_target;
use tabsynth::annotate::Dataset;
use tabsynth::design_space::DesignSpace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let space = DesignSpace::compressor();
    if let Ok(ds) = Dataset::from_csv_str("fuzz", space.clone(), text) {
        let written = ds.to_csv_string().expect("parsed dataset writes");
        let back = Dataset::from_csv_str("fuzz", space, &written).expect("written csv reparses");
        assert_eq!(back.to_csv_string().unwrap(), written);
    }
});

#![no_main]

use blepi::{validate_datum, BLDatum};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(datum) = BLDatum::from_json(text) {
        // Anything accepted must survive a round trip and validation.
        let back = BLDatum::from_json(&datum.to_json()).expect("canonical JSON re-parses");
        assert_eq!(back, datum);
        let _ = validate_datum(&datum, 1e-10);
    }
});

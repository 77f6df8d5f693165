#![no_main]

use blepi::transport::parse_distribution_json;
use blepi::monotone_1d_map;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dist) = parse_distribution_json(text) {
        if let Ok(map) = monotone_1d_map(dist) {
            for z in [-8.0, -1.0, 0.0, 0.5, 8.0] {
                let _ = map.apply(&[z]);
                let _ = map.derivative_1d(z);
            }
        }
    }
});

#![no_main]

use blepi::transport::parse_targets_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(targets) = parse_targets_json(text) {
        for t in &targets {
            let _ = t.quantile(0.5);
            let _ = t.ln_pdf(0.0);
        }
    }
});

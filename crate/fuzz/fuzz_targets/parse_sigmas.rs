#![no_main]

use blepi::cli::parse_sigmas;
use blepi::verifier::gaussian_product_map;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sigmas) = parse_sigmas(text) {
        let _ = gaussian_product_map(&sigmas);
    }
});

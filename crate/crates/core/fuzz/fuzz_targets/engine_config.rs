#![no_main]

use idp_core::batch::EngineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = EngineConfig::parse(text) {
        let _ = c.settings();
    }
});

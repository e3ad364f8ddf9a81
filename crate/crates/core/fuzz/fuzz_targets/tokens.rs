#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = idp_service::Tokens::parse(text) {
        assert!(t.0.keys().all(|k| !k.trim().is_empty()));
    }
});

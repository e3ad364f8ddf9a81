#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = idp_core::model::parse_packet(text) {
        let again = serde_json::to_string(&p).unwrap();
        assert_eq!(idp_core::model::parse_packet(&again).unwrap(), p);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(classes) = idp_core::model::parse_class_config(text) {
        let again = serde_json::json!({ "classes": classes }).to_string();
        assert_eq!(idp_core::model::parse_class_config(&again).unwrap(), classes);
    }
});

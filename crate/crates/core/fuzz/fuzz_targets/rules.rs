#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rules) = idp_core::rules::parse_rules(text, None) {
        for r in &rules {
            let d = idp_core::rules::consolidate(r, &[]);
            assert!(!d.reasoning.is_empty());
        }
    }
});

#![no_main]

use std::sync::OnceLock;

use idp_core::extraction::validate_output;
use idp_core::model::parse_class_config;
use idp_core::ClassSchema;
use libfuzzer_sys::fuzz_target;

fn classes() -> &'static [ClassSchema] {
    static C: OnceLock<Vec<ClassSchema>> = OnceLock::new();
    C.get_or_init(|| parse_class_config(include_str!("../../../../data/classes.json")).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for schema in classes() {
        let _ = validate_output(text, schema);
    }
});

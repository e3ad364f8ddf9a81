#![no_main]

use std::sync::OnceLock;

use idp_core::model::{parse_class_config, parse_ground_truth};
use idp_core::ClassSchema;
use libfuzzer_sys::fuzz_target;

fn classes() -> &'static [ClassSchema] {
    static C: OnceLock<Vec<ClassSchema>> = OnceLock::new();
    C.get_or_init(|| parse_class_config(include_str!("../../../../data/classes.json")).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_ground_truth(text, None);
    if let Ok(gt) = parse_ground_truth(text, Some(classes())) {
        for s in &gt.sections {
            if let Some(schema) = classes().iter().find(|c| c.class_name == s.class_name) {
                let _ = s.typed_attributes(schema);
            }
        }
    }
});

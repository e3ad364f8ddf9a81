#![no_main]

use idp_core::segmentation::{decode_bio, encode_sections, BioLabel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let labels: Result<Vec<BioLabel>, _> = text.split_whitespace().map(str::parse).collect();
    let Ok(labels) = labels else { return };
    let sections = decode_bio(&labels);
    let pages: Vec<usize> = sections.iter().flat_map(|s| s.page_indices.iter().copied()).collect();
    assert_eq!(pages, (0..labels.len()).collect::<Vec<_>>());
    assert_eq!(decode_bio(&encode_sections(&sections)), sections);
});

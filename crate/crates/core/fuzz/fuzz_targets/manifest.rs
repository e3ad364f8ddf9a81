#![no_main]

use std::path::Path;

use idp_core::batch::{parse_manifest, ManifestFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for format in [ManifestFormat::Csv, ManifestFormat::Json] {
        if let Ok(m) = parse_manifest(text, format, Path::new("/base")) {
            for (i, row) in m.rows.iter().enumerate() {
                assert!(row.row >= 1);
                assert!(m.rows[..i].iter().all(|r| r.row != row.row));
            }
        }
    }
});

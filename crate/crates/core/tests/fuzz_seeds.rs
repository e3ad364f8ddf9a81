//! Replays the checked-in fuzz seeds through the parsers on the stable toolchain.

use std::path::{Path, PathBuf};

use idp_core::assessment::ReviewDecision;
use idp_core::batch::{parse_manifest, EngineConfig, ManifestFormat};
use idp_core::extraction::validate_output;
use idp_core::model::{parse_class_config, parse_ground_truth, parse_packet};
use idp_core::rules::{parse_rules, Expr};
use idp_core::segmentation::{decode_bio, BioLabel};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<(PathBuf, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn name(p: &Path) -> &str {
    p.file_name().unwrap().to_str().unwrap()
}

#[test]
fn structured_inputs() {
    for (p, t) in seeds("packet") {
        assert_eq!(
            parse_packet(&t).is_ok(),
            name(&p) != "index_gap.json",
            "{}",
            p.display()
        );
    }
    let mut shipped = Vec::new();
    for (p, t) in seeds("class_config") {
        let classes = parse_class_config(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        if name(&p) == "shipped.json" {
            shipped = classes;
        }
    }
    assert!(!shipped.is_empty());
    for (p, t) in seeds("ground_truth") {
        parse_ground_truth(&t, Some(&shipped)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("rules") {
        parse_rules(&t, Some(&shipped)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("engine_config") {
        EngineConfig::parse(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("review_decision") {
        serde_json::from_str::<ReviewDecision>(&t)
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("manifest") {
        let format = if name(&p).ends_with(".json") {
            ManifestFormat::Json
        } else {
            ManifestFormat::Csv
        };
        parse_manifest(&t, format, Path::new("/base"))
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn text_inputs() {
    for (p, t) in seeds("rule_condition") {
        assert_eq!(
            Expr::parse(&t).is_ok(),
            name(&p) != "unbalanced.txt",
            "{}",
            p.display()
        );
    }
    for (p, t) in seeds("bio_labels") {
        let labels: Vec<BioLabel> = t.split_whitespace().map(|l| l.parse().unwrap()).collect();
        let pages: usize = decode_bio(&labels)
            .iter()
            .map(|s| s.page_indices.len())
            .sum();
        assert_eq!(pages, labels.len(), "{}", p.display());
    }
    let classes = parse_class_config(include_str!("../../../data/classes.json")).unwrap();
    let invoice = classes.iter().find(|c| c.class_name == "invoice").unwrap();
    for (p, t) in seeds("model_output") {
        let ok = validate_output(&t, invoice).is_ok();
        assert_eq!(ok, name(&p) != "prose.txt", "{}", p.display());
    }
}

//! Structured comparison of predictions against ground truth.
//!
//! Attribute values are compared with per-field comparators (exact, fuzzy,
//! numeric, bbox IoU), lists of records are paired with a minimum-cost
//! assignment, counts are weighted per field and aggregated micro (pooled) and
//! macro (per document). Document splitting is scored separately by page
//! accuracy and ordered / unordered section accuracy.

mod compare;
mod counts;
mod hungarian;
mod iou;
mod report;
mod similarity;
mod split;

use std::collections::BTreeMap;

pub use compare::{compare_value, MatchOutcome};
pub use counts::{
    evaluate_document, expected_weight, match_lists, FieldCount, FieldCounts, ListMatch, Record,
};
pub use hungarian::{hungarian_assign, Assignment};
pub use iou::bbox_iou;
pub use report::{aggregate, f1, ordered_sum, EvaluationReport, FieldSummary, Prf};
pub use similarity::{edit_distance, normalize, similarity};
pub use split::{aggregate_splits, split_metrics, PacketSplit, SplitReport, SplitSection};

use crate::error::{Error, Result};
use crate::extraction::ExtractionResult;
use crate::model::{ClassSchema, GroundTruth, Value};
use crate::segmentation::Section;
use crate::OTHER_CLASS;

fn schema_for<'a>(classes: &'a [ClassSchema], name: &str) -> Result<Option<&'a ClassSchema>> {
    if name == OTHER_CLASS {
        return Ok(None);
    }
    classes
        .iter()
        .find(|c| c.class_name == name)
        .map(Some)
        .ok_or_else(|| Error::Validation(format!("unknown class {name:?}")))
}

/// Counts one packet's extraction output against its ground truth.
///
/// Each ground-truth section is paired with the unused predicted section of
/// the same class that shares the most pages (earliest on ties). Unpaired
/// ground-truth sections count all their values as false negatives; unpaired
/// predicted sections count theirs as false positives.
pub fn evaluate_packet(
    gt: &GroundTruth,
    sections: &[Section],
    results: &[ExtractionResult],
    classes: &[ClassSchema],
) -> Result<FieldCounts> {
    let predicted_values = |s: &Section| -> BTreeMap<String, Value> {
        results
            .iter()
            .find(|r| r.section_id == s.section_id && r.is_ok())
            .map(ExtractionResult::value_map)
            .unwrap_or_default()
    };
    let mut used = vec![false; sections.len()];
    let mut counts = FieldCounts::default();
    for g in &gt.sections {
        let Some(schema) = schema_for(classes, &g.class_name)? else {
            continue;
        };
        let overlap = |s: &Section| {
            s.page_indices
                .iter()
                .filter(|p| g.pages.contains(p))
                .count()
        };
        let best = (0..sections.len())
            .filter(|&k| {
                !used[k] && sections[k].class_name == g.class_name && overlap(&sections[k]) > 0
            })
            .max_by(|&a, &b| {
                overlap(&sections[a])
                    .cmp(&overlap(&sections[b]))
                    .then(b.cmp(&a))
            });
        let predicted = match best {
            Some(k) => {
                used[k] = true;
                predicted_values(&sections[k])
            }
            None => BTreeMap::new(),
        };
        counts.merge(&evaluate_document(
            &g.typed_attributes(schema)?,
            &predicted,
            schema,
        )?);
    }
    for (k, s) in sections.iter().enumerate() {
        if used[k] {
            continue;
        }
        if let Some(schema) = schema_for(classes, &s.class_name)? {
            counts.merge(&evaluate_document(
                &BTreeMap::new(),
                &predicted_values(s),
                schema,
            )?);
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{AttributeValue, ExtractionStatus, Provenance, Usage};
    use crate::model::{parse_class_config, parse_ground_truth};

    fn classes() -> Vec<ClassSchema> {
        parse_class_config(
            r#"{"classes":[
              {"class_name":"invoice","attributes":[{"name":"total","value_kind":"number"}]},
              {"class_name":"w2","attributes":[{"name":"wages","value_kind":"number"}]}]}"#,
        )
        .unwrap()
    }

    fn section(id: &str, class: &str, pages: &[usize]) -> Section {
        Section {
            section_id: id.into(),
            class_name: class.into(),
            page_indices: pages.to_vec(),
        }
    }

    fn result(id: &str, class: &str, name: &str, v: f64) -> ExtractionResult {
        ExtractionResult {
            section_id: id.into(),
            class_name: class.into(),
            attributes: vec![AttributeValue {
                name: name.into(),
                value: Value::Number(v),
                confidence: 0.95,
                bbox: None,
                justification: None,
                provenance: Provenance::Model,
            }],
            status: ExtractionStatus::Ok,
            failure_reason: None,
            failure_kind: None,
            attempts: 1,
            latency_ms: 0.0,
            cost: 0.0,
            usage: Usage::default(),
            warnings: vec![],
        }
    }

    #[test]
    fn pairs_sections_by_class_and_overlap() {
        let gt = parse_ground_truth(
            r#"{"packet_id":"p","sections":[
              {"class_name":"invoice","pages":[0,1],"attributes":{"total":10}},
              {"class_name":"w2","pages":[2],"attributes":{"wages":5}},
              {"class_name":"other","pages":[3]}]}"#,
            Some(&classes()),
        )
        .unwrap();
        let sections = vec![
            section("a", "invoice", &[0, 1]),
            section("b", "w2", &[2]),
            section("c", "other", &[3]),
        ];
        let results = vec![
            result("a", "invoice", "total", 10.0),
            result("b", "w2", "wages", 6.0),
        ];
        let c = evaluate_packet(&gt, &sections, &results, &classes()).unwrap();
        assert_eq!(c.tp(), 1.0);
        assert_eq!((c.fp(), c.fn_()), (1.0, 1.0));

        // a misclassified section: its values are false positives, truth is missed
        let sections = vec![
            section("a", "w2", &[0, 1]),
            section("b", "w2", &[2]),
            section("c", "other", &[3]),
        ];
        let results = vec![
            result("a", "w2", "wages", 10.0),
            result("b", "w2", "wages", 5.0),
        ];
        let c = evaluate_packet(&gt, &sections, &results, &classes()).unwrap();
        assert_eq!((c.tp(), c.fp(), c.fn_()), (1.0, 1.0, 1.0));
    }
}

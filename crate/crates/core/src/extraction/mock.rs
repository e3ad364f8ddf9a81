//! Offline extractor backends.

use regex::{Captures, Regex};
use serde_json::{json, Map};

use super::{BackendResponse, ExtractorBackend, ModelRequest, Usage};
use crate::error::{Error, Result};
use crate::model::{parse_number, AttributeSchema, BoundingBox, ClassSchema, ValueKind};

pub const HIGH_CONFIDENCE: f64 = 0.95;
pub const LOW_CONFIDENCE: f64 = 0.5;

const LOW_MARKER: &str = ";low=";

/// A mock extraction pattern: `<regex>` optionally followed by `;low=<regex>`.
///
/// A capture by the primary regex is reported with confidence 0.95; when only
/// the low variant matches, with 0.5. Scalar attributes use capture group 1
/// (or the whole match); list attributes use one named group per record field
/// and produce a record per match.
#[derive(Debug, Clone)]
pub struct MockPattern {
    primary: Regex,
    low: Option<Regex>,
}

impl MockPattern {
    pub fn parse(pattern: &str) -> Result<Self, String> {
        let (primary, low) = match pattern.split_once(LOW_MARKER) {
            Some((p, l)) => (p, Some(l)),
            None => (pattern, None),
        };
        let compile = |s: &str| Regex::new(s).map_err(|e| e.to_string());
        Ok(MockPattern {
            primary: compile(primary)?,
            low: low.map(compile).transpose()?,
        })
    }

    fn variants(&self) -> impl Iterator<Item = (&Regex, f64)> {
        std::iter::once((&self.primary, HIGH_CONFIDENCE))
            .chain(self.low.iter().map(|r| (r, LOW_CONFIDENCE)))
    }
}

fn coerce(text: &str, kind: ValueKind) -> Option<serde_json::Value> {
    let text = text.trim();
    match kind {
        ValueKind::String | ValueKind::Date => (!text.is_empty()).then(|| json!(text)),
        ValueKind::Number => parse_number(text).map(|n| json!(n)),
        ValueKind::Bbox => {
            let nums: Vec<f64> = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().ok())
                .collect::<Option<_>>()?;
            let arr: [f64; 4] = nums.try_into().ok()?;
            BoundingBox::from(arr).check("bbox").ok()?;
            Some(json!(arr))
        }
        ValueKind::List => None,
    }
}

fn scalar_capture(caps: &Captures<'_>) -> Option<String> {
    caps.get(1)
        .or_else(|| caps.get(0))
        .map(|m| m.as_str().to_string())
}

fn extract_attribute(
    attr: &AttributeSchema,
    pattern: &MockPattern,
    text: &str,
) -> Option<serde_json::Value> {
    for (re, confidence) in pattern.variants() {
        let value = if attr.value_kind == ValueKind::List {
            let records: Vec<serde_json::Value> = re
                .captures_iter(text)
                .filter_map(|caps| {
                    let rec: Map<String, serde_json::Value> = attr
                        .fields
                        .iter()
                        .filter_map(|f| {
                            let m = caps.name(&f.name)?;
                            coerce(m.as_str(), f.value_kind).map(|v| (f.name.clone(), v))
                        })
                        .collect();
                    (!rec.is_empty()).then_some(serde_json::Value::Object(rec))
                })
                .collect();
            (!records.is_empty()).then(|| json!(records))
        } else {
            re.captures(text)
                .and_then(|c| scalar_capture(&c))
                .and_then(|s| coerce(&s, attr.value_kind))
        };
        if let Some(value) = value {
            return Some(json!({
                "value": value,
                "confidence": confidence,
                "justification": format!("matched mock pattern {}", re.as_str()),
            }));
        }
    }
    None
}

/// Runs every attribute's mock pattern over the request's section text.
///
/// Unmatched attributes are omitted; the output is always a JSON object that
/// validates against `schema`.
pub fn mock_extract(request: &ModelRequest, schema: &ClassSchema) -> String {
    let text = request.section_text.as_deref().unwrap_or("");
    let mut out = Map::new();
    for attr in &schema.attributes {
        let Some(pattern) = attr
            .mock_pattern
            .as_deref()
            .and_then(|p| MockPattern::parse(p).ok())
        else {
            continue;
        };
        if let Some(v) = extract_attribute(attr, &pattern, text) {
            out.insert(attr.name.clone(), v);
        }
    }
    serde_json::Value::Object(out).to_string()
}

fn approx_tokens(s: &str) -> u64 {
    (s.chars().count() as u64).div_ceil(4)
}

fn usage_for(request: &ModelRequest, raw: &str) -> Usage {
    Usage {
        input_tokens: approx_tokens(&request.prompt()),
        output_tokens: approx_tokens(raw),
    }
}

/// Deterministic pattern-matching extractor.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockExtractor;

impl ExtractorBackend for MockExtractor {
    fn name(&self) -> &str {
        "mock"
    }

    fn extract(&self, request: &ModelRequest, schema: &ClassSchema) -> Result<BackendResponse> {
        let raw = mock_extract(request, schema);
        Ok(BackendResponse {
            usage: usage_for(request, &raw),
            raw,
        })
    }
}

/// Always answers in prose instead of JSON.
#[derive(Debug, Default, Clone, Copy)]
pub struct AlwaysProseExtractor;

impl ExtractorBackend for AlwaysProseExtractor {
    fn name(&self) -> &str {
        "always_prose"
    }

    fn extract(&self, request: &ModelRequest, _: &ClassSchema) -> Result<BackendResponse> {
        let raw = format!(
            "Sure! Here is what I found in this {} document. The total looks right to me.",
            request.class_name
        );
        Ok(BackendResponse {
            usage: usage_for(request, &raw),
            raw,
        })
    }
}

/// Always fails as if the backend were unreachable.
#[derive(Debug, Default, Clone, Copy)]
pub struct FailingExtractor;

impl ExtractorBackend for FailingExtractor {
    fn name(&self) -> &str {
        "failing"
    }

    fn extract(&self, _: &ModelRequest, _: &ClassSchema) -> Result<BackendResponse> {
        Err(Error::Backend("backend unavailable".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{validate_output, Modality};
    use crate::model::{parse_class_config, Value};
    use proptest::prelude::*;

    fn request(text: &str) -> ModelRequest {
        ModelRequest {
            packet_id: "p".into(),
            section_id: "s".into(),
            class_name: "invoice".into(),
            class_description: String::new(),
            attributes: vec![],
            few_shot: vec![],
            section_text: Some(text.into()),
            image_refs: vec![],
            modality: Modality::Ocr,
        }
    }

    fn schema() -> ClassSchema {
        parse_class_config(
            r#"{"classes":[{"class_name":"invoice","attributes":[
              {"name":"total","value_kind":"number","mock_pattern":"Total:\\s*([0-9.]+);low=Total \\(unclear\\):\\s*([0-9.]+)"},
              {"name":"vendor","value_kind":"string","mock_pattern":"Vendor:\\s*(.+)"},
              {"name":"region","value_kind":"bbox","mock_pattern":"Region:\\s*(.+)"},
              {"name":"items","value_kind":"list","mock_pattern":"Item (?P<desc>\\w+) x(?P<qty>\\d+)",
               "fields":[{"name":"desc","value_kind":"string"},{"name":"qty","value_kind":"number"}]}
            ]}]}"#,
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn captures_total() {
        let raw = mock_extract(&request("Total: 42.00"), &schema());
        let v = validate_output(&raw, &schema()).unwrap();
        assert_eq!(v.attributes.len(), 1);
        assert_eq!(v.attributes[0].name, "total");
        assert_eq!(v.attributes[0].value, Value::Number(42.0));
        assert_eq!(v.attributes[0].confidence, HIGH_CONFIDENCE);
    }

    #[test]
    fn no_match_is_empty_object() {
        assert_eq!(mock_extract(&request("nothing"), &schema()), "{}");
    }

    #[test]
    fn only_matching_attributes_emitted() {
        let raw = mock_extract(
            &request("Vendor: Acme Corp\nRegion: 0.1,0.2,0.3,0.4"),
            &schema(),
        );
        let v = validate_output(&raw, &schema()).unwrap();
        let names: Vec<_> = v.attributes.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, vec!["vendor", "region"]);
        assert_eq!(v.attributes[0].value, Value::Text("Acme Corp".into()));
    }

    #[test]
    fn low_variant_and_lists() {
        let raw = mock_extract(
            &request("Total (unclear): 7\nItem bolt x3\nItem nut x12"),
            &schema(),
        );
        let v = validate_output(&raw, &schema()).unwrap();
        assert_eq!(v.attributes[0].confidence, LOW_CONFIDENCE);
        match &v.attributes[1].value {
            Value::Records(rs) => {
                assert_eq!(rs.len(), 2);
                assert_eq!(rs[1]["qty"], Value::Number(12.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_bbox_capture_is_omitted() {
        assert_eq!(
            mock_extract(&request("Region: 0.5,0.5,0.1,0.1"), &schema()),
            "{}"
        );
    }

    proptest! {
        #[test]
        fn mock_output_always_validates(text in "\\PC{0,200}", lines in proptest::collection::vec("(Total|Vendor|Region|Item) ?[:(]?[ a-z0-9.,x]{0,12}", 0..6)) {
            let full = format!("{text}\n{}", lines.join("\n"));
            let raw = mock_extract(&request(&full), &schema());
            prop_assert!(validate_output(&raw, &schema()).is_ok());
        }
    }
}

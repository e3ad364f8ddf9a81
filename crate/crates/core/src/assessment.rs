//! Confidence reporting, review routing, and applying reviewer decisions.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{ExtractionResult, Provenance};
use crate::model::{ClassSchema, TextLine, Value};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeConfidence {
    pub name: String,
    pub confidence: f64,
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
}

/// OCR line confidences of a section, rescaled from percent to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcrSummary {
    pub min: f64,
    pub mean: f64,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub section_id: String,
    pub threshold: f64,
    pub entries: Vec<AttributeConfidence>,
    /// `None` when the section has no text lines.
    pub ocr_summary: Option<OcrSummary>,
    pub min_attribute_confidence: f64,
}

impl ConfidenceReport {
    pub fn flagged(&self) -> impl Iterator<Item = &AttributeConfidence> {
        self.entries.iter().filter(|e| e.flagged)
    }

    pub fn is_flagged(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.flagged && e.name == name)
    }
}

/// Builds the confidence report for a successful extraction. An attribute is
/// flagged when its confidence is strictly below `threshold`.
pub fn assess(
    result: &ExtractionResult,
    lines: &[TextLine],
    threshold: f64,
) -> Result<ConfidenceReport> {
    if !result.is_ok() {
        return Err(Error::AssessOnFailed(result.section_id.clone()));
    }
    let entries: Vec<AttributeConfidence> = result
        .attributes
        .iter()
        .map(|a| AttributeConfidence {
            name: a.name.clone(),
            confidence: a.confidence,
            flagged: a.confidence < threshold,
            justification: a.justification.clone(),
        })
        .collect();
    let min_attribute_confidence = entries.iter().map(|e| e.confidence).fold(1.0, f64::min);
    let ocr_summary = (!lines.is_empty()).then(|| {
        let confs = lines.iter().map(|l| l.confidence / 100.0);
        OcrSummary {
            min: confs.clone().fold(f64::INFINITY, f64::min),
            mean: confs.sum::<f64>() / lines.len() as f64,
            lines: lines.len(),
        }
    });
    Ok(ConfidenceReport {
        section_id: result.section_id.clone(),
        threshold,
        entries,
        ocr_summary,
        min_attribute_confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingOutcome {
    AutoApprove,
    Review,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub outcome: RoutingOutcome,
    pub trigger_attributes: Vec<String>,
    pub threshold_used: f64,
}

/// Routes to review iff HITL is enabled and some attribute is below `threshold`.
pub fn route(report: &ConfidenceReport, hitl_enabled: bool, threshold: f64) -> RoutingDecision {
    let trigger_attributes: Vec<String> = report
        .entries
        .iter()
        .filter(|e| e.confidence < threshold)
        .map(|e| e.name.clone())
        .collect();
    let outcome = if hitl_enabled && !trigger_attributes.is_empty() {
        RoutingOutcome::Review
    } else {
        RoutingOutcome::AutoApprove
    };
    RoutingDecision {
        outcome,
        trigger_attributes,
        threshold_used: threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Admin,
    Reviewer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ReviewAction {
    Accept,
    Override { value: serde_json::Value },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDecision {
    pub section_id: String,
    pub attribute: String,
    #[serde(flatten)]
    pub action: ReviewAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub reviewer: String,
    pub role: Role,
    pub actions: Vec<AttributeDecision>,
    /// RFC 3339 or any caller-chosen stamp; recorded verbatim.
    #[serde(default)]
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub section_id: String,
    pub attribute: String,
    pub old: Option<Value>,
    pub new: Value,
}

/// One applied review decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub job_id: String,
    pub reviewer: String,
    pub role: Role,
    pub timestamp: String,
    pub corrections: Vec<Correction>,
}

/// Applies the actions of `decision` addressed to `result`'s section.
///
/// Accepted attributes keep their value and become human-confirmed
/// (confidence 1.0); overridden attributes take the new value with confidence
/// 1.0. Fails if a flagged attribute of the section has no action, if a
/// reviewer acts on an unflagged attribute, or if an override does not fit the
/// attribute's kind.
pub fn apply_review(
    result: &ExtractionResult,
    report: &ConfidenceReport,
    schema: &ClassSchema,
    decision: &ReviewDecision,
) -> Result<(ExtractionResult, Vec<Correction>)> {
    let actions: Vec<&AttributeDecision> = decision
        .actions
        .iter()
        .filter(|a| a.section_id == result.section_id)
        .collect();
    let covered: BTreeSet<&str> = actions.iter().map(|a| a.attribute.as_str()).collect();
    let missing: Vec<String> = report
        .flagged()
        .filter(|e| !covered.contains(e.name.as_str()))
        .map(|e| format!("{}/{}", result.section_id, e.name))
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteDecision(missing));
    }

    let mut updated = result.clone();
    let mut corrections = Vec::new();
    for a in actions {
        if decision.role == Role::Reviewer && !report.is_flagged(&a.attribute) {
            return Err(Error::Unauthorized(format!(
                "reviewer {} may only decide flagged attributes; {} is not flagged",
                decision.reviewer, a.attribute
            )));
        }
        let attr_schema = schema.attribute(&a.attribute).ok_or_else(|| {
            Error::KindMismatch(format!(
                "{}: not an attribute of {}",
                a.attribute, schema.class_name
            ))
        })?;
        match &a.action {
            ReviewAction::Accept => {
                if let Some(v) = updated
                    .attributes
                    .iter_mut()
                    .find(|v| v.name == a.attribute)
                {
                    v.confidence = 1.0;
                    v.provenance = Provenance::Human;
                }
            }
            ReviewAction::Override { value } => {
                let new = Value::from_json(value, attr_schema)
                    .map_err(Error::KindMismatch)?
                    .ok_or_else(|| {
                        Error::KindMismatch(format!("{}: override value is null", a.attribute))
                    })?;
                let old = match updated
                    .attributes
                    .iter_mut()
                    .find(|v| v.name == a.attribute)
                {
                    Some(v) => {
                        let old = std::mem::replace(&mut v.value, new.clone());
                        v.confidence = 1.0;
                        v.provenance = Provenance::Human;
                        v.justification = Some(format!("overridden by {}", decision.reviewer));
                        Some(old)
                    }
                    None => {
                        updated.attributes.push(crate::extraction::AttributeValue {
                            name: a.attribute.clone(),
                            value: new.clone(),
                            confidence: 1.0,
                            bbox: None,
                            justification: Some(format!("added by {}", decision.reviewer)),
                            provenance: Provenance::Human,
                        });
                        None
                    }
                };
                corrections.push(Correction {
                    section_id: result.section_id.clone(),
                    attribute: a.attribute.clone(),
                    old,
                    new,
                });
            }
        }
    }
    updated
        .attributes
        .sort_by_key(|v| schema.attributes.iter().position(|s| s.name == v.name));
    Ok((updated, corrections))
}

/// Append-only JSON-lines log of applied review decisions.
#[derive(Debug, Clone)]
pub struct CorrectionLog {
    path: PathBuf,
}

impl CorrectionLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        CorrectionLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &CorrectionRecord) -> Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        f.write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        f.sync_data().map_err(|e| Error::io(&self.path, e))
    }

    pub fn read_all(&self) -> Result<Vec<CorrectionRecord>> {
        let text = match std::fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.path, e)),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| Error::Parse(format!("correction log: {e}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{AttributeValue, ExtractionStatus, Usage};
    use crate::model::{parse_class_config, BoundingBox};
    use proptest::prelude::*;

    fn schema() -> ClassSchema {
        parse_class_config(
            r#"{"classes":[{"class_name":"invoice","attributes":[
                {"name":"total","value_kind":"number"},{"name":"vendor","value_kind":"string"}]}]}"#,
        )
        .unwrap()
        .remove(0)
    }

    fn result(confs: &[(&str, f64)]) -> ExtractionResult {
        ExtractionResult {
            section_id: "sec-000".into(),
            class_name: "invoice".into(),
            attributes: confs
                .iter()
                .map(|(n, c)| AttributeValue {
                    name: n.to_string(),
                    value: if *n == "total" {
                        Value::Number(12.0)
                    } else {
                        Value::Text("Acme".into())
                    },
                    confidence: *c,
                    bbox: None,
                    justification: None,
                    provenance: Provenance::Model,
                })
                .collect(),
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

    fn line(conf: f64) -> TextLine {
        TextLine {
            text: "x".into(),
            confidence: conf,
            bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn assess_examples() {
        let r = assess(
            &result(&[("vendor", 0.95), ("total", 0.5)]),
            &[line(80.0), line(100.0)],
            0.8,
        )
        .unwrap();
        assert!(!r.entries[0].flagged && r.entries[1].flagged);
        assert_eq!(r.min_attribute_confidence, 0.5);
        let ocr = r.ocr_summary.unwrap();
        assert!((ocr.min - 0.8).abs() < 1e-12 && (ocr.mean - 0.9).abs() < 1e-12);

        let r = assess(&result(&[("total", 0.8)]), &[], 0.8).unwrap();
        assert!(!r.entries[0].flagged);
        assert!(r.ocr_summary.is_none());

        let r = assess(&result(&[]), &[], 0.8).unwrap();
        assert!(r.entries.is_empty());
        assert_eq!(r.min_attribute_confidence, 1.0);

        let mut failed = result(&[]);
        failed.status = ExtractionStatus::Failed;
        assert!(matches!(
            assess(&failed, &[], 0.8),
            Err(Error::AssessOnFailed(_))
        ));
    }

    #[test]
    fn route_examples() {
        let r = assess(&result(&[("total", 0.5)]), &[], 0.8).unwrap();
        let d = route(&r, true, 0.8);
        assert_eq!(d.outcome, RoutingOutcome::Review);
        assert_eq!(d.trigger_attributes, vec!["total"]);
        assert_eq!(route(&r, false, 0.8).outcome, RoutingOutcome::AutoApprove);
        let r = assess(&result(&[("total", 0.9)]), &[], 0.8).unwrap();
        assert_eq!(route(&r, true, 0.8).outcome, RoutingOutcome::AutoApprove);
    }

    fn decision(role: Role, actions: Vec<(&str, ReviewAction)>) -> ReviewDecision {
        ReviewDecision {
            reviewer: "rita".into(),
            role,
            actions: actions
                .into_iter()
                .map(|(a, action)| AttributeDecision {
                    section_id: "sec-000".into(),
                    attribute: a.into(),
                    action,
                })
                .collect(),
            timestamp: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn override_and_history() {
        let res = result(&[("total", 0.5), ("vendor", 0.95)]);
        let rep = assess(&res, &[], 0.8).unwrap();
        let d = decision(
            Role::Reviewer,
            vec![(
                "total",
                ReviewAction::Override {
                    value: serde_json::json!(120.0),
                },
            )],
        );
        let (updated, corrections) = apply_review(&res, &rep, &schema(), &d).unwrap();
        let total = updated.attribute("total").unwrap();
        assert_eq!(total.value, Value::Number(120.0));
        assert_eq!(total.confidence, 1.0);
        assert_eq!(total.provenance, Provenance::Human);
        assert_eq!(corrections.len(), 1);
        assert_eq!(corrections[0].old, Some(Value::Number(12.0)));

        let dir = tempfile::tempdir().unwrap();
        let log = CorrectionLog::new(dir.path().join("corrections.log"));
        let rec = CorrectionRecord {
            job_id: "j".into(),
            reviewer: d.reviewer.clone(),
            role: d.role,
            timestamp: d.timestamp.clone(),
            corrections,
        };
        log.append(&rec).unwrap();
        assert_eq!(log.read_all().unwrap(), vec![rec]);
    }

    #[test]
    fn decision_errors() {
        let res = result(&[("total", 0.5), ("vendor", 0.6)]);
        let rep = assess(&res, &[], 0.8).unwrap();
        let d = decision(Role::Admin, vec![("total", ReviewAction::Accept)]);
        assert!(
            matches!(apply_review(&res, &rep, &schema(), &d), Err(Error::IncompleteDecision(m)) if m == vec!["sec-000/vendor"])
        );

        let res = result(&[("total", 0.5), ("vendor", 0.95)]);
        let rep = assess(&res, &[], 0.8).unwrap();
        let d = decision(
            Role::Reviewer,
            vec![
                ("total", ReviewAction::Accept),
                (
                    "vendor",
                    ReviewAction::Override {
                        value: serde_json::json!("Other"),
                    },
                ),
            ],
        );
        assert!(matches!(
            apply_review(&res, &rep, &schema(), &d),
            Err(Error::Unauthorized(_))
        ));
        let admin = ReviewDecision {
            role: Role::Admin,
            ..d
        };
        assert!(apply_review(&res, &rep, &schema(), &admin).is_ok());

        let d = decision(
            Role::Reviewer,
            vec![(
                "total",
                ReviewAction::Override {
                    value: serde_json::json!("abc"),
                },
            )],
        );
        assert!(matches!(
            apply_review(&res, &rep, &schema(), &d),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn accept_only_is_idempotent() {
        let res = result(&[("total", 0.5), ("vendor", 0.95)]);
        let rep = assess(&res, &[], 0.8).unwrap();
        let d = decision(Role::Reviewer, vec![("total", ReviewAction::Accept)]);
        let (once, c1) = apply_review(&res, &rep, &schema(), &d).unwrap();
        let (twice, c2) = apply_review(&once, &rep, &schema(), &d).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.attribute("total").unwrap().value, Value::Number(12.0));
        assert!(c1.is_empty() && c2.is_empty());
        // nothing the decision covered stays below threshold
        let after = assess(&once, &[], 0.8).unwrap();
        assert_eq!(after.flagged().count(), 0);
    }

    proptest! {
        #[test]
        fn lowering_threshold_never_adds_flags(confs in proptest::collection::vec(0.0f64..=1.0, 0..8), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let names: Vec<String> = (0..confs.len()).map(|i| format!("a{i}")).collect();
            let pairs: Vec<(&str, f64)> = names.iter().map(|s| s.as_str()).zip(confs.iter().copied()).collect();
            let res = result(&pairs);
            let at_hi = route(&assess(&res, &[], hi).unwrap(), true, hi);
            let at_lo = route(&assess(&res, &[], lo).unwrap(), true, lo);
            let hi_set: BTreeSet<_> = at_hi.trigger_attributes.iter().collect();
            prop_assert!(at_lo.trigger_attributes.iter().all(|a| hi_set.contains(a)));
            if at_hi.outcome == RoutingOutcome::AutoApprove {
                prop_assert_eq!(at_lo.outcome, RoutingOutcome::AutoApprove);
            }
        }
    }
}

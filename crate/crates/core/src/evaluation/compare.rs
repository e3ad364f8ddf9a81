use serde::{Deserialize, Serialize};

use super::iou::bbox_iou;
use super::similarity::{normalize, similarity};
use crate::error::{Error, Result};
use crate::model::{ComparatorKind, ComparatorSpec, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub matched: bool,
    /// Similarity, IoU or numeric closeness in `[0, 1]`.
    pub score: f64,
    pub detail: String,
}

fn kind_mismatch(expected: &Value, predicted: &Value, spec: &ComparatorSpec) -> Error {
    Error::KindMismatch(format!(
        "{:?} comparator cannot compare {expected} with {predicted}",
        spec.kind
    ))
}

/// Numeric closeness `1 − |e − p| / max(|e|, |p|)`, 1 when both are zero.
fn closeness(e: f64, p: f64) -> f64 {
    let scale = e.abs().max(p.abs());
    if scale == 0.0 {
        return 1.0;
    }
    (1.0 - (e - p).abs() / scale).clamp(0.0, 1.0)
}

pub fn compare_value(
    expected: &Value,
    predicted: &Value,
    spec: &ComparatorSpec,
) -> Result<MatchOutcome> {
    let outcome = match (spec.kind, expected, predicted) {
        (ComparatorKind::Exact, Value::Text(e), Value::Text(p)) => {
            let equal = normalize(e, spec.normalize_case, spec.trim_whitespace)
                == normalize(p, spec.normalize_case, spec.trim_whitespace);
            MatchOutcome {
                matched: equal,
                score: if equal { 1.0 } else { 0.0 },
                detail: format!("exact {e:?} vs {p:?}"),
            }
        }
        (ComparatorKind::Exact, Value::Number(e), Value::Number(p)) => MatchOutcome {
            matched: e == p,
            score: if e == p { 1.0 } else { 0.0 },
            detail: format!("exact {e} vs {p}"),
        },
        (ComparatorKind::Exact, Value::Region(e), Value::Region(p)) => MatchOutcome {
            matched: e == p,
            score: if e == p { 1.0 } else { 0.0 },
            detail: "exact region".into(),
        },
        (ComparatorKind::Fuzzy, Value::Text(e), Value::Text(p)) => {
            let score = similarity(e, p, spec.normalize_case, spec.trim_whitespace);
            MatchOutcome {
                matched: score >= spec.threshold,
                score,
                detail: format!("similarity {score:.4} vs threshold {}", spec.threshold),
            }
        }
        (ComparatorKind::Numeric, Value::Number(e), Value::Number(p)) => {
            let diff = (e - p).abs();
            MatchOutcome {
                matched: diff <= spec.tolerance,
                score: closeness(*e, *p),
                detail: format!("|{e} - {p}| = {diff} vs tolerance {}", spec.tolerance),
            }
        }
        (ComparatorKind::BboxIou, Value::Region(e), Value::Region(p)) => {
            let score = bbox_iou(e, p);
            MatchOutcome {
                matched: score >= spec.threshold,
                score,
                detail: format!("iou {score:.4} vs threshold {}", spec.threshold),
            }
        }
        _ => return Err(kind_mismatch(expected, predicted, spec)),
    };
    Ok(outcome)
}

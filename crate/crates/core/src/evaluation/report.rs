use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::counts::{FieldCount, FieldCounts};

/// Sums after sorting, so the result does not depend on input order.
pub fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: f64, fp: f64, fn_: f64) -> Self {
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    #[serde(flatten)]
    pub counts: FieldCount,
    #[serde(flatten)]
    pub metrics: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub micro: Prf,
    /// Mean of per-document precision, recall and F1 over documents with any count.
    pub macro_avg: Prf,
    pub fields: BTreeMap<String, FieldSummary>,
    /// Weighted micro F1.
    pub extraction_score: f64,
    pub documents: usize,
    pub failed: usize,
}

/// Aggregates per-document counts. Failed documents are passed only as a count.
pub fn aggregate(documents: &[FieldCounts], failed: usize) -> EvaluationReport {
    let tp = ordered_sum(documents.iter().map(FieldCounts::tp));
    let fp = ordered_sum(documents.iter().map(FieldCounts::fp));
    let fn_ = ordered_sum(documents.iter().map(FieldCounts::fn_));
    let micro = Prf::from_counts(tp, fp, fn_);

    let per_doc: Vec<Prf> = documents
        .iter()
        .filter(|d| d.is_countable())
        .map(|d| Prf::from_counts(d.tp(), d.fp(), d.fn_()))
        .collect();
    let mean = |f: fn(&Prf) -> f64| {
        if per_doc.is_empty() {
            0.0
        } else {
            ordered_sum(per_doc.iter().map(f)) / per_doc.len() as f64
        }
    };
    let macro_avg = Prf {
        precision: mean(|p| p.precision),
        recall: mean(|p| p.recall),
        f1: mean(|p| p.f1),
    };

    let mut by_field: BTreeMap<String, Vec<FieldCount>> = BTreeMap::new();
    for d in documents {
        for (k, c) in &d.0 {
            by_field.entry(k.clone()).or_default().push(*c);
        }
    }
    let fields = by_field
        .into_iter()
        .map(|(k, cs)| {
            let counts = FieldCount {
                tp: ordered_sum(cs.iter().map(|c| c.tp)),
                fp: ordered_sum(cs.iter().map(|c| c.fp)),
                fn_: ordered_sum(cs.iter().map(|c| c.fn_)),
                weight: cs.last().map_or(0.0, |c| c.weight),
            };
            let metrics = Prf::from_counts(counts.tp, counts.fp, counts.fn_);
            (k, FieldSummary { counts, metrics })
        })
        .collect();

    EvaluationReport {
        micro,
        macro_avg,
        fields,
        extraction_score: micro.f1,
        documents: documents.len(),
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tp: f64, fp: f64, fn_: f64) -> FieldCounts {
        let mut c = FieldCounts::default();
        c.0.insert(
            "x".into(),
            FieldCount {
                tp,
                fp,
                fn_,
                weight: 1.0,
            },
        );
        c
    }

    #[test]
    fn hand_computed_micro() {
        let r = aggregate(&[doc(3.0, 1.0, 2.0)], 0);
        assert_eq!(r.micro.precision, 0.75);
        assert_eq!(r.micro.recall, 0.6);
        // 2·0.75·0.6 / 1.35 = 2/3
        assert!((r.micro.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.extraction_score, r.micro.f1);
    }

    #[test]
    fn perfect_and_empty() {
        let r = aggregate(&[doc(2.0, 0.0, 0.0), doc(5.0, 0.0, 0.0)], 1);
        assert_eq!(
            (r.micro.f1, r.macro_avg.f1, r.extraction_score),
            (1.0, 1.0, 1.0)
        );
        assert_eq!(r.failed, 1);
        let r = aggregate(&[doc(0.0, 3.0, 1.0)], 0);
        assert_eq!(
            (r.micro.precision, r.micro.recall, r.micro.f1),
            (0.0, 0.0, 0.0)
        );
        let r = aggregate(&[], 0);
        assert_eq!(r.extraction_score, 0.0);
    }

    #[test]
    fn macro_skips_uncountable_documents() {
        let r = aggregate(
            &[doc(1.0, 0.0, 0.0), doc(0.0, 0.0, 0.0), doc(0.0, 1.0, 0.0)],
            0,
        );
        assert_eq!(r.macro_avg.f1, 0.5);
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::compare::compare_value;
use super::hungarian::hungarian_assign;
use crate::error::Result;
use crate::model::{AttributeSchema, ClassSchema, Value, ValueKind};

/// Weighted outcome counts for one field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldCount {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub weight: f64,
}

impl FieldCount {
    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_
    }
}

/// Field name → counts. List subfields are keyed `list[].field`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldCounts(pub BTreeMap<String, FieldCount>);

impl FieldCounts {
    fn entry(&mut self, name: &str, weight: f64) -> &mut FieldCount {
        let e = self.0.entry(name.to_string()).or_default();
        e.weight = weight;
        e
    }

    /// Adds `other` into `self`.
    pub fn merge(&mut self, other: &FieldCounts) {
        for (k, v) in &other.0 {
            let e = self.0.entry(k.clone()).or_default();
            e.tp += v.tp;
            e.fp += v.fp;
            e.fn_ += v.fn_;
            e.weight = v.weight;
        }
    }

    pub fn tp(&self) -> f64 {
        super::report::ordered_sum(self.0.values().map(|c| c.tp))
    }

    pub fn fp(&self) -> f64 {
        super::report::ordered_sum(self.0.values().map(|c| c.fp))
    }

    pub fn fn_(&self) -> f64 {
        super::report::ordered_sum(self.0.values().map(|c| c.fn_))
    }

    /// Whether any count is nonzero.
    pub fn is_countable(&self) -> bool {
        self.0.values().any(|c| c.total() > 0.0)
    }
}

/// Applies the presence/match counting rule for one field.
fn count_field(
    counts: &mut FieldCounts,
    key: &str,
    weight: f64,
    schema: &AttributeSchema,
    expected: Option<&Value>,
    predicted: Option<&Value>,
) -> Result<()> {
    match (expected, predicted) {
        (None, None) => {}
        (None, Some(_)) => counts.entry(key, weight).fp += weight,
        (Some(_), None) => counts.entry(key, weight).fn_ += weight,
        (Some(e), Some(p)) => {
            let m = compare_value(e, p, &schema.comparator)?;
            let c = counts.entry(key, weight);
            if m.matched {
                c.tp += weight;
            } else {
                c.fp += weight;
                c.fn_ += weight;
            }
        }
    }
    Ok(())
}

pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListMatch {
    /// `(expected index, predicted index, item score)` for retained pairs.
    pub pairs: Vec<(usize, usize, f64)>,
    pub counts: FieldCounts,
}

/// Weighted fraction of record fields that match, over fields present in either record.
fn item_score(expected: &Record, predicted: &Record, list: &AttributeSchema) -> Result<f64> {
    let mut matched = 0.0;
    let mut total = 0.0;
    for f in &list.fields {
        match (expected.get(&f.name), predicted.get(&f.name)) {
            (None, None) => {}
            (Some(e), Some(p)) => {
                total += f.weight;
                if compare_value(e, p, &f.comparator)?.matched {
                    matched += f.weight;
                }
            }
            _ => total += f.weight,
        }
    }
    Ok(if total > 0.0 { matched / total } else { 0.0 })
}

/// Pairs expected and predicted records by minimum total `1 − item score` and
/// counts record fields. Pairs scoring 0 are dissolved; unpaired records count
/// each present field as a false positive (predicted) or false negative
/// (expected). Field weights are multiplied by the list attribute's weight.
pub fn match_lists(
    expected: &[Record],
    predicted: &[Record],
    list: &AttributeSchema,
) -> Result<ListMatch> {
    let mut scores = vec![vec![0.0; predicted.len()]; expected.len()];
    for (i, e) in expected.iter().enumerate() {
        for (j, p) in predicted.iter().enumerate() {
            scores[i][j] = item_score(e, p, list)?;
        }
    }
    let cost: Vec<Vec<f64>> = scores
        .iter()
        .map(|row| row.iter().map(|s| 1.0 - s).collect())
        .collect();
    let assignment = hungarian_assign(&cost)?;

    let mut counts = FieldCounts::default();
    let mut pairs = Vec::new();
    let mut expected_paired = vec![false; expected.len()];
    let mut predicted_paired = vec![false; predicted.len()];
    for (i, j) in assignment.pairs {
        if scores[i][j] <= 0.0 {
            continue;
        }
        expected_paired[i] = true;
        predicted_paired[j] = true;
        pairs.push((i, j, scores[i][j]));
        for f in &list.fields {
            let key = format!("{}[].{}", list.name, f.name);
            let w = f.weight * list.weight;
            count_field(
                &mut counts,
                &key,
                w,
                f,
                expected[i].get(&f.name),
                predicted[j].get(&f.name),
            )?;
        }
    }
    for f in &list.fields {
        let key = format!("{}[].{}", list.name, f.name);
        let w = f.weight * list.weight;
        for (i, e) in expected.iter().enumerate() {
            if !expected_paired[i] && e.contains_key(&f.name) {
                counts.entry(&key, w).fn_ += w;
            }
        }
        for (j, p) in predicted.iter().enumerate() {
            if !predicted_paired[j] && p.contains_key(&f.name) {
                counts.entry(&key, w).fp += w;
            }
        }
    }
    Ok(ListMatch { pairs, counts })
}

fn records(v: Option<&Value>) -> &[Record] {
    match v {
        Some(Value::Records(rs)) => rs,
        _ => &[],
    }
}

/// Counts one document's attributes against `schema`.
pub fn evaluate_document(
    expected: &BTreeMap<String, Value>,
    predicted: &BTreeMap<String, Value>,
    schema: &ClassSchema,
) -> Result<FieldCounts> {
    let mut counts = FieldCounts::default();
    for attr in &schema.attributes {
        let e = expected.get(&attr.name);
        let p = predicted.get(&attr.name);
        if attr.value_kind == ValueKind::List {
            for v in [e, p].into_iter().flatten() {
                if !matches!(v, Value::Records(_)) {
                    return Err(crate::Error::KindMismatch(format!(
                        "{}: expected records, got {v}",
                        attr.name
                    )));
                }
            }
            let m = match_lists(records(e), records(p), attr)?;
            counts.merge(&m.counts);
        } else {
            count_field(&mut counts, &attr.name, attr.weight, attr, e, p)?;
        }
    }
    Ok(counts)
}

/// Weighted number of fields present in `expected`, including list record fields.
pub fn expected_weight(expected: &BTreeMap<String, Value>, schema: &ClassSchema) -> f64 {
    let mut total = 0.0;
    for attr in &schema.attributes {
        match (attr.value_kind, expected.get(&attr.name)) {
            (_, None) => {}
            (ValueKind::List, Some(v)) => {
                for rec in records(Some(v)) {
                    for f in &attr.fields {
                        if rec.contains_key(&f.name) {
                            total += f.weight * attr.weight;
                        }
                    }
                }
            }
            (_, Some(_)) => total += attr.weight,
        }
    }
    total
}

//! Domain data model and the three input loaders (packets, class configuration,
//! ground truth).
//!
//! All files are JSON. Loaders return [`Error::Parse`] when the bytes are not a
//! well-formed document of the expected shape and [`Error::Validation`] when the
//! document parses but violates an invariant; validation messages lead with the
//! offending field path, e.g. `pages[2].lines[0].confidence`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::extraction::MockPattern;
use crate::OTHER_CLASS;

/// Axis-aligned box in page-fraction coordinates, origin top-left.
///
/// Serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let b = BoundingBox { x0, y0, x1, y1 };
        b.check("bbox")?;
        Ok(b)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub(crate) fn check(&self, path: &str) -> Result<()> {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        if coords
            .iter()
            .any(|c| !c.is_finite() || !(0.0..=1.0).contains(c))
        {
            return Err(Error::Validation(format!(
                "{path}: coordinates {coords:?} must lie in [0,1]"
            )));
        }
        if self.x0 > self.x1 || self.y0 > self.y1 {
            return Err(Error::Validation(format!(
                "{path}: expected x0 <= x1 and y0 <= y1, got {coords:?}"
            )));
        }
        Ok(())
    }
}

impl From<[f64; 4]> for BoundingBox {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        BoundingBox { x0, y0, x1, y1 }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// One OCR line. `confidence` is a percentage in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub text: String,
    pub confidence: f64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub lines: Vec<TextLine>,
}

impl Page {
    /// Lines joined with newlines.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, line) in self.lines.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&line.text);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentPacket {
    pub packet_id: String,
    pub pages: Vec<Page>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_path: String,
}

impl DocumentPacket {
    pub fn validate(&self) -> Result<()> {
        if self.packet_id.trim().is_empty() {
            return Err(Error::Validation("packet_id: must be nonempty".into()));
        }
        if self.pages.is_empty() {
            return Err(Error::Validation(
                "pages: a packet needs at least one page".into(),
            ));
        }
        for (i, page) in self.pages.iter().enumerate() {
            if page.index != i {
                let what = if page.index > i {
                    "gap"
                } else {
                    "duplicate or out of order"
                };
                return Err(Error::Validation(format!(
                    "pages[{i}].index: expected {i}, found {} ({what} in page indices)",
                    page.index
                )));
            }
            for (j, line) in page.lines.iter().enumerate() {
                if !line.confidence.is_finite() || !(0.0..=100.0).contains(&line.confidence) {
                    return Err(Error::Validation(format!(
                        "pages[{i}].lines[{j}].confidence: {} outside [0,100]",
                        line.confidence
                    )));
                }
                line.bbox.check(&format!("pages[{i}].lines[{j}].bbox"))?;
            }
        }
        Ok(())
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }
}

/// Parses and validates a packet document. `source_path` is kept if present.
pub fn parse_packet(text: &str) -> Result<DocumentPacket> {
    let packet: DocumentPacket =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("packet: {e}")))?;
    packet.validate()?;
    Ok(packet)
}

pub fn load_packet(path: impl AsRef<Path>) -> Result<DocumentPacket> {
    let path = path.as_ref();
    let mut packet = parse_packet(&read_to_string(path)?)?;
    if packet.source_path.is_empty() {
        packet.source_path = path.display().to_string();
    }
    Ok(packet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    String,
    Number,
    Date,
    /// A `[x0, y0, x1, y1]` region, compared with the bbox-iou comparator.
    Bbox,
    #[serde(alias = "list-of-records", alias = "list_of_records")]
    List,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::String => "string",
            ValueKind::Number => "number",
            ValueKind::Date => "date",
            ValueKind::Bbox => "bbox",
            ValueKind::List => "list",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparatorKind {
    Exact,
    Fuzzy,
    Numeric,
    #[serde(alias = "bbox_iou", alias = "iou")]
    BboxIou,
}

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.8;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorSpec {
    pub kind: ComparatorKind,
    /// Similarity floor for fuzzy, IoU floor for bbox-iou.
    pub threshold: f64,
    /// Absolute tolerance for numeric.
    pub tolerance: f64,
    pub normalize_case: bool,
    pub trim_whitespace: bool,
}

impl ComparatorSpec {
    pub fn new(kind: ComparatorKind) -> Self {
        let threshold = match kind {
            ComparatorKind::BboxIou => DEFAULT_IOU_THRESHOLD,
            _ => DEFAULT_FUZZY_THRESHOLD,
        };
        ComparatorSpec {
            kind,
            threshold,
            tolerance: 0.0,
            normalize_case: true,
            trim_whitespace: true,
        }
    }

    pub fn exact() -> Self {
        Self::new(ComparatorKind::Exact)
    }

    pub fn fuzzy(threshold: f64) -> Self {
        ComparatorSpec {
            threshold,
            ..Self::new(ComparatorKind::Fuzzy)
        }
    }

    pub fn numeric(tolerance: f64) -> Self {
        ComparatorSpec {
            tolerance,
            ..Self::new(ComparatorKind::Numeric)
        }
    }

    pub fn bbox_iou(threshold: f64) -> Self {
        ComparatorSpec {
            threshold,
            ..Self::new(ComparatorKind::BboxIou)
        }
    }

    fn default_for(kind: ValueKind) -> Self {
        match kind {
            ValueKind::Number => Self::numeric(0.0),
            ValueKind::Bbox => Self::new(ComparatorKind::BboxIou),
            _ => Self::exact(),
        }
    }
}

/// Input shape for [`ComparatorSpec`]; every field may be absent or null.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComparator {
    kind: Option<ComparatorKind>,
    threshold: Option<f64>,
    tolerance: Option<f64>,
    normalize_case: Option<bool>,
    trim_whitespace: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input: String,
    pub expected: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    pub name: String,
    pub value_kind: ValueKind,
    pub description: Option<String>,
    pub comparator: ComparatorSpec,
    pub weight: f64,
    pub mock_pattern: Option<String>,
    /// Line template used by the corpus generator, `{value}` or `{<subfield>}` placeholders.
    pub mock_template: Option<String>,
    pub few_shot_examples: Vec<FewShotExample>,
    /// Record fields for list attributes.
    pub fields: Vec<AttributeSchema>,
}

// List attributes are compared field by field, so their comparator is not written.
impl Serialize for AttributeSchema {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            name: &'a str,
            value_kind: ValueKind,
            #[serde(skip_serializing_if = "Option::is_none")]
            description: &'a Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            comparator: Option<&'a ComparatorSpec>,
            weight: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            mock_pattern: &'a Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            mock_template: &'a Option<String>,
            #[serde(skip_serializing_if = "<[_]>::is_empty")]
            few_shot_examples: &'a [FewShotExample],
            #[serde(skip_serializing_if = "<[_]>::is_empty")]
            fields: &'a [AttributeSchema],
        }
        Out {
            name: &self.name,
            value_kind: self.value_kind,
            description: &self.description,
            comparator: (self.value_kind != ValueKind::List).then_some(&self.comparator),
            weight: self.weight,
            mock_pattern: &self.mock_pattern,
            mock_template: &self.mock_template,
            few_shot_examples: &self.few_shot_examples,
            fields: &self.fields,
        }
        .serialize(serializer)
    }
}

impl AttributeSchema {
    pub fn new(name: impl Into<String>, value_kind: ValueKind) -> Self {
        AttributeSchema {
            name: name.into(),
            value_kind,
            description: None,
            comparator: ComparatorSpec::default_for(value_kind),
            weight: 1.0,
            mock_pattern: None,
            mock_template: None,
            few_shot_examples: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn with_comparator(mut self, comparator: ComparatorSpec) -> Self {
        self.comparator = comparator;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_pattern(mut self, pattern: impl Into<String>) -> Self {
        self.mock_pattern = Some(pattern.into());
        self
    }

    pub fn with_fields(mut self, fields: Vec<AttributeSchema>) -> Self {
        self.fields = fields;
        self
    }

    pub fn field(&self, name: &str) -> Option<&AttributeSchema> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttribute {
    name: String,
    value_kind: ValueKind,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    comparator: Option<RawComparator>,
    #[serde(default)]
    weight: Option<f64>,
    #[serde(default)]
    mock_pattern: Option<String>,
    #[serde(default)]
    mock_template: Option<String>,
    #[serde(default)]
    few_shot_examples: Option<Vec<FewShotExample>>,
    #[serde(default)]
    fields: Option<Vec<RawAttribute>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSchema {
    pub class_name: String,
    pub description: String,
    pub keywords: Vec<String>,
    pub attributes: Vec<AttributeSchema>,
}

impl ClassSchema {
    pub fn attribute(&self, name: &str) -> Option<&AttributeSchema> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    class_name: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    keywords: Option<Vec<String>>,
    #[serde(default)]
    attributes: Option<Vec<RawAttribute>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClassConfig {
    classes: Vec<RawClass>,
}

fn build_comparator(
    raw: Option<RawComparator>,
    kind: ValueKind,
    path: &str,
) -> Result<ComparatorSpec> {
    let raw = raw.unwrap_or_default();
    let mut spec = match raw.kind {
        Some(k) => ComparatorSpec::new(k),
        None => ComparatorSpec::default_for(kind),
    };
    if let Some(t) = raw.threshold {
        spec.threshold = t;
    }
    if let Some(t) = raw.tolerance {
        spec.tolerance = t;
    }
    if let Some(b) = raw.normalize_case {
        spec.normalize_case = b;
    }
    if let Some(b) = raw.trim_whitespace {
        spec.trim_whitespace = b;
    }
    if !spec.threshold.is_finite() || !(0.0..=1.0).contains(&spec.threshold) {
        return Err(Error::Validation(format!(
            "{path}.comparator.threshold: {} outside [0,1]",
            spec.threshold
        )));
    }
    if !spec.tolerance.is_finite() || spec.tolerance < 0.0 {
        return Err(Error::Validation(format!(
            "{path}.comparator.tolerance: {} must be >= 0",
            spec.tolerance
        )));
    }
    let compatible = match spec.kind {
        ComparatorKind::Exact => kind != ValueKind::List,
        ComparatorKind::Fuzzy => matches!(kind, ValueKind::String | ValueKind::Date),
        ComparatorKind::Numeric => kind == ValueKind::Number,
        ComparatorKind::BboxIou => kind == ValueKind::Bbox,
    };
    if !compatible && !(kind == ValueKind::List && raw.kind.is_none()) {
        return Err(Error::Validation(format!(
            "{path}.comparator.kind: {:?} cannot compare {kind} values",
            spec.kind
        )));
    }
    Ok(spec)
}

fn build_attribute(raw: RawAttribute, path: &str, nested: bool) -> Result<AttributeSchema> {
    if raw.name.trim().is_empty() {
        return Err(Error::Validation(format!("{path}.name: must be nonempty")));
    }
    let comparator = build_comparator(raw.comparator, raw.value_kind, path)?;
    let weight = raw.weight.unwrap_or(1.0);
    if !weight.is_finite() || weight < 0.0 {
        return Err(Error::Validation(format!(
            "{path}.weight: {weight} must be a nonnegative number"
        )));
    }
    if let Some(p) = &raw.mock_pattern {
        MockPattern::parse(p)
            .map_err(|e| Error::Validation(format!("{path}.mock_pattern: {e}")))?;
    }
    let raw_fields = raw.fields.unwrap_or_default();
    let mut fields = Vec::with_capacity(raw_fields.len());
    match raw.value_kind {
        ValueKind::List => {
            if nested {
                return Err(Error::Validation(format!(
                    "{path}.value_kind: list attributes cannot be nested inside records"
                )));
            }
            if raw_fields.is_empty() {
                return Err(Error::Validation(format!(
                    "{path}.fields: list attributes need at least one record field"
                )));
            }
            let mut seen = BTreeSet::new();
            for (k, f) in raw_fields.into_iter().enumerate() {
                let fpath = format!("{path}.fields[{k}]");
                if !seen.insert(f.name.clone()) {
                    return Err(Error::Validation(format!(
                        "{fpath}.name: duplicate record field {:?}",
                        f.name
                    )));
                }
                fields.push(build_attribute(f, &fpath, true)?);
            }
        }
        _ if !raw_fields.is_empty() => {
            return Err(Error::Validation(format!(
                "{path}.fields: only list attributes have record fields"
            )));
        }
        _ => {}
    }
    Ok(AttributeSchema {
        name: raw.name,
        value_kind: raw.value_kind,
        description: raw.description,
        comparator,
        weight,
        mock_pattern: raw.mock_pattern,
        mock_template: raw.mock_template,
        few_shot_examples: raw.few_shot_examples.unwrap_or_default(),
        fields,
    })
}

/// Parses and validates a class configuration, filling in comparator and weight defaults.
pub fn parse_class_config(text: &str) -> Result<Vec<ClassSchema>> {
    let raw: RawClassConfig =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("class config: {e}")))?;
    let mut seen_classes = BTreeSet::new();
    let mut classes = Vec::with_capacity(raw.classes.len());
    for (i, rc) in raw.classes.into_iter().enumerate() {
        let path = format!("classes[{i}]");
        if rc.class_name.trim().is_empty() {
            return Err(Error::Validation(format!(
                "{path}.class_name: must be nonempty"
            )));
        }
        if !seen_classes.insert(rc.class_name.clone()) {
            return Err(Error::Validation(format!(
                "{path}.class_name: duplicate class {:?}",
                rc.class_name
            )));
        }
        let raw_attrs = rc.attributes.unwrap_or_default();
        if rc.class_name == OTHER_CLASS && !raw_attrs.is_empty() {
            return Err(Error::Validation(format!(
                "{path}.attributes: reserved class {OTHER_CLASS:?} cannot declare attributes"
            )));
        }
        let mut seen_attrs = BTreeSet::new();
        let mut attributes = Vec::with_capacity(raw_attrs.len());
        for (j, ra) in raw_attrs.into_iter().enumerate() {
            let apath = format!("{path}.attributes[{j}]");
            if !seen_attrs.insert(ra.name.clone()) {
                return Err(Error::Validation(format!(
                    "{apath}.name: duplicate attribute {:?} in class {:?}",
                    ra.name, rc.class_name
                )));
            }
            attributes.push(build_attribute(ra, &apath, false)?);
        }
        classes.push(ClassSchema {
            class_name: rc.class_name,
            description: rc.description.unwrap_or_default(),
            keywords: rc.keywords.unwrap_or_default(),
            attributes,
        });
    }
    Ok(classes)
}

pub fn load_class_config(path: impl AsRef<Path>) -> Result<Vec<ClassSchema>> {
    parse_class_config(&read_to_string(path.as_ref())?)
}

/// Typed attribute value. Dates are kept as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
    Region(BoundingBox),
    Records(Vec<BTreeMap<String, Value>>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Region(b) => write!(f, "[{}, {}, {}, {}]", b.x0, b.y0, b.x1, b.y1),
            Value::Records(rs) => write!(f, "<{} records>", rs.len()),
        }
    }
}

/// Parses a number written with optional currency symbols and thousands separators.
pub fn parse_number(s: &str) -> Option<f64> {
    let cleaned: String = s
        .chars()
        .filter(|c| !matches!(c, '$' | '€' | '£' | '¥' | ',') && !c.is_whitespace())
        .collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|n| n.is_finite())
}

impl Value {
    /// Whether this value is admissible for `kind`.
    pub fn matches_kind(&self, kind: ValueKind) -> bool {
        matches!(
            (self, kind),
            (Value::Number(_), ValueKind::Number)
                | (Value::Text(_), ValueKind::String | ValueKind::Date)
                | (Value::Region(_), ValueKind::Bbox)
                | (Value::Records(_), ValueKind::List)
        )
    }

    /// Converts a JSON value into a typed value for `schema`.
    ///
    /// Returns `Ok(None)` for JSON null (an absent value). Unknown record fields are dropped.
    pub fn from_json(
        json: &serde_json::Value,
        schema: &AttributeSchema,
    ) -> Result<Option<Value>, String> {
        use serde_json::Value as J;
        if json.is_null() {
            return Ok(None);
        }
        let mismatch = || {
            format!(
                "{}: expected {}, got {json}",
                schema.name, schema.value_kind
            )
        };
        let v = match schema.value_kind {
            ValueKind::String | ValueKind::Date => match json {
                J::String(s) => Value::Text(s.clone()),
                _ => return Err(mismatch()),
            },
            ValueKind::Number => match json {
                J::Number(n) => Value::Number(n.as_f64().ok_or_else(mismatch)?),
                J::String(s) => Value::Number(parse_number(s).ok_or_else(mismatch)?),
                _ => return Err(mismatch()),
            },
            ValueKind::Bbox => {
                let arr = json
                    .as_array()
                    .filter(|a| a.len() == 4)
                    .ok_or_else(mismatch)?;
                let mut c = [0.0; 4];
                for (slot, item) in c.iter_mut().zip(arr) {
                    *slot = item.as_f64().ok_or_else(mismatch)?;
                }
                let b = BoundingBox::from(c);
                b.check(&schema.name).map_err(|e| e.to_string())?;
                Value::Region(b)
            }
            ValueKind::List => {
                let arr = json.as_array().ok_or_else(mismatch)?;
                let mut records = Vec::with_capacity(arr.len());
                for (i, item) in arr.iter().enumerate() {
                    let obj = item.as_object().ok_or_else(|| {
                        format!("{}[{i}]: expected a record, got {item}", schema.name)
                    })?;
                    let mut rec = BTreeMap::new();
                    for field in &schema.fields {
                        if let Some(raw) = obj.get(&field.name) {
                            if let Some(v) = Value::from_json(raw, field)
                                .map_err(|e| format!("{}[{i}].{e}", schema.name))?
                            {
                                rec.insert(field.name.clone(), v);
                            }
                        }
                    }
                    records.push(rec);
                }
                Value::Records(records)
            }
        };
        Ok(Some(v))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("values serialize infallibly")
    }
}

/// One labeled section of a ground-truth baseline. `pages` may be in any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSection {
    pub class_name: String,
    pub pages: Vec<usize>,
    #[serde(default)]
    pub attributes: serde_json::Map<String, serde_json::Value>,
}

impl GroundTruthSection {
    /// Typed attribute map for `schema`; keys not in the schema are ignored.
    pub fn typed_attributes(&self, schema: &ClassSchema) -> Result<BTreeMap<String, Value>> {
        let mut out = BTreeMap::new();
        for attr in &schema.attributes {
            if let Some(raw) = self.attributes.get(&attr.name) {
                if let Some(v) = Value::from_json(raw, attr).map_err(Error::KindMismatch)? {
                    out.insert(attr.name.clone(), v);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub packet_id: String,
    pub sections: Vec<GroundTruthSection>,
}

impl GroundTruth {
    /// Validates structure and, when `classes` is given, class names and attribute kinds.
    pub fn validate(&self, classes: Option<&[ClassSchema]>) -> Result<()> {
        if self.packet_id.trim().is_empty() {
            return Err(Error::Validation("packet_id: must be nonempty".into()));
        }
        if self.sections.is_empty() {
            return Err(Error::Validation(
                "sections: a baseline must label every page".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, s) in self.sections.iter().enumerate() {
            if s.pages.is_empty() {
                return Err(Error::Validation(format!(
                    "sections[{i}].pages: must be nonempty"
                )));
            }
            for p in &s.pages {
                if !seen.insert(*p) {
                    return Err(Error::Validation(format!(
                        "sections[{i}].pages: page {p} labeled more than once"
                    )));
                }
            }
            if let Some(classes) = classes {
                if s.class_name == OTHER_CLASS {
                    continue;
                }
                let schema = classes
                    .iter()
                    .find(|c| c.class_name == s.class_name)
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "sections[{i}].class_name: unknown class {:?}",
                            s.class_name
                        ))
                    })?;
                s.typed_attributes(schema)
                    .map_err(|e| Error::Validation(format!("sections[{i}].attributes: {e}")))?;
            }
        }
        Ok(())
    }
}

pub fn parse_ground_truth(text: &str, classes: Option<&[ClassSchema]>) -> Result<GroundTruth> {
    let gt: GroundTruth =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("ground truth: {e}")))?;
    gt.validate(classes)?;
    Ok(gt)
}

pub fn load_ground_truth(
    path: impl AsRef<Path>,
    classes: Option<&[ClassSchema]>,
) -> Result<GroundTruth> {
    parse_ground_truth(&read_to_string(path.as_ref())?, classes)
}

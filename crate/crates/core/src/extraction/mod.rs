//! Schema-driven attribute extraction.
//!
//! [`build_request`] assembles what a backend sees for one section,
//! [`validate_output`] checks a raw backend response against the class schema,
//! and [`extract_section`] ties the two together with retries, latency and cost
//! accounting.

mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use mock::{
    mock_extract, AlwaysProseExtractor, FailingExtractor, MockExtractor, MockPattern,
    HIGH_CONFIDENCE, LOW_CONFIDENCE,
};

use crate::error::{read_to_string, Error, Result};
use crate::model::{AttributeSchema, BoundingBox, ClassSchema, DocumentPacket, Value, ValueKind};
use crate::orchestrator::retry::{with_retry, RetryPolicy, Sleeper};
use crate::segmentation::Section;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Modality {
    #[default]
    #[serde(rename = "ocr")]
    Ocr,
    #[serde(rename = "image")]
    Image,
    #[serde(rename = "ocr+image", alias = "ocr_image")]
    OcrImage,
}

impl Modality {
    pub fn uses_text(self) -> bool {
        matches!(self, Modality::Ocr | Modality::OcrImage)
    }

    pub fn uses_images(self) -> bool {
        matches!(self, Modality::Image | Modality::OcrImage)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Ocr => "ocr",
            Modality::Image => "image",
            Modality::OcrImage => "ocr+image",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ocr" => Ok(Modality::Ocr),
            "image" => Ok(Modality::Image),
            "ocr+image" | "ocr_image" => Ok(Modality::OcrImage),
            _ => Err(Error::Validation(format!(
                "modality: {s:?} is not one of ocr, image, ocr+image"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub value_kind: ValueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<AttributeSpec>,
}

impl From<&AttributeSchema> for AttributeSpec {
    fn from(a: &AttributeSchema) -> Self {
        AttributeSpec {
            name: a.name.clone(),
            value_kind: a.value_kind,
            description: a.description.clone(),
            fields: a.fields.iter().map(AttributeSpec::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotPair {
    pub attribute: String,
    pub input: String,
    pub expected: serde_json::Value,
}

/// Everything a backend receives for one section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub packet_id: String,
    pub section_id: String,
    pub class_name: String,
    pub class_description: String,
    pub attributes: Vec<AttributeSpec>,
    pub few_shot: Vec<FewShotPair>,
    /// Section lines with page markers; `None` for image-only requests.
    pub section_text: Option<String>,
    pub image_refs: Vec<String>,
    pub modality: Modality,
}

impl ModelRequest {
    /// Renders the request as a single prompt: class description, attribute
    /// list, few-shot block, then the section text.
    pub fn prompt(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Document class: {}\n", self.class_name));
        if !self.class_description.is_empty() {
            out.push_str(&format!("Description: {}\n", self.class_description));
        }
        out.push_str("\nExtract the following attributes as a JSON object:\n");
        for a in &self.attributes {
            render_spec(&mut out, a, 0);
        }
        if !self.few_shot.is_empty() {
            out.push_str("\nExamples:\n");
            for ex in &self.few_shot {
                out.push_str(&format!("<example attribute=\"{}\">\n", ex.attribute));
                out.push_str(&format!(
                    "input: {}\noutput: {}\n</example>\n",
                    ex.input, ex.expected
                ));
            }
        }
        if !self.image_refs.is_empty() {
            out.push_str("\nPage images:\n");
            for r in &self.image_refs {
                out.push_str(&format!("- {r}\n"));
            }
        }
        if let Some(text) = &self.section_text {
            out.push_str("\nDocument text:\n");
            out.push_str(text);
            out.push('\n');
        }
        out
    }
}

fn render_spec(out: &mut String, a: &AttributeSpec, depth: usize) {
    let pad = "  ".repeat(depth);
    out.push_str(&format!("{pad}- {} ({})", a.name, a.value_kind));
    if let Some(d) = &a.description {
        out.push_str(&format!(": {d}"));
    }
    out.push('\n');
    for f in &a.fields {
        render_spec(out, f, depth + 1);
    }
}

/// Concatenated section lines with `--- page N ---` markers.
pub fn section_text(section: &Section, packet: &DocumentPacket) -> String {
    let mut out = String::new();
    for &p in &section.page_indices {
        let Some(page) = packet.pages.get(p) else {
            continue;
        };
        out.push_str(&format!("--- page {p} ---\n"));
        for line in &page.lines {
            out.push_str(&line.text);
            out.push('\n');
        }
    }
    out
}

pub fn build_request(
    section: &Section,
    packet: &DocumentPacket,
    schema: &ClassSchema,
    modality: Modality,
    few_shot: bool,
) -> Result<ModelRequest> {
    if section.class_name != schema.class_name {
        return Err(Error::Validation(format!(
            "section {}: class {:?} does not match schema {:?}",
            section.section_id, section.class_name, schema.class_name
        )));
    }
    let has_text = section
        .page_indices
        .iter()
        .filter_map(|p| packet.pages.get(*p))
        .any(|p| !p.lines.is_empty());
    let images: Vec<String> = section
        .page_indices
        .iter()
        .filter_map(|p| packet.pages.get(*p))
        .filter_map(|p| p.image_ref.clone())
        .collect();

    match modality {
        Modality::Ocr if !has_text => {
            return Err(Error::EmptyInput(format!(
                "section {} has no text lines for ocr modality",
                section.section_id
            )))
        }
        Modality::Image if images.len() < section.page_indices.len() => {
            return Err(Error::MissingImage(format!(
                "section {}: {} of {} pages lack an image_ref",
                section.section_id,
                section.page_indices.len() - images.len(),
                section.page_indices.len()
            )))
        }
        Modality::OcrImage if !has_text && images.is_empty() => {
            return Err(Error::EmptyInput(format!(
                "section {} has neither text nor images",
                section.section_id
            )))
        }
        _ => {}
    }

    let few_shot_pairs = if few_shot {
        schema
            .attributes
            .iter()
            .flat_map(|a| {
                a.few_shot_examples.iter().map(|ex| FewShotPair {
                    attribute: a.name.clone(),
                    input: ex.input.clone(),
                    expected: ex.expected.clone(),
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(ModelRequest {
        packet_id: packet.packet_id.clone(),
        section_id: section.section_id.clone(),
        class_name: schema.class_name.clone(),
        class_description: schema.description.clone(),
        attributes: schema.attributes.iter().map(AttributeSpec::from).collect(),
        few_shot: few_shot_pairs,
        section_text: modality.uses_text().then(|| section_text(section, packet)),
        image_refs: if modality.uses_images() {
            images
        } else {
            Vec::new()
        },
        modality,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Model,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeValue {
    pub name: String,
    pub value: Value,
    /// In `[0, 1]`.
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Ok,
    Failed,
}

/// Why an extraction failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The backend kept answering with output that does not fit the schema.
    Structure,
    /// The backend kept erroring out.
    Backend,
    /// The section cannot be sent in the requested modality.
    Input,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub section_id: String,
    pub class_name: String,
    pub attributes: Vec<AttributeValue>,
    pub status: ExtractionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
    pub attempts: u32,
    /// Wall-clock milliseconds across all attempts.
    pub latency_ms: f64,
    pub cost: f64,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ExtractionResult {
    pub fn is_ok(&self) -> bool {
        self.status == ExtractionStatus::Ok
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeValue> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Attribute name → value map, as compared by the evaluator.
    pub fn value_map(&self) -> BTreeMap<String, Value> {
        self.attributes
            .iter()
            .map(|a| (a.name.clone(), a.value.clone()))
            .collect()
    }

    /// A successful result with no attributes, used for sections of the reserved class.
    pub fn empty(section: &Section) -> Self {
        ExtractionResult {
            section_id: section.section_id.clone(),
            class_name: section.class_name.clone(),
            attributes: Vec::new(),
            status: ExtractionStatus::Ok,
            failure_reason: None,
            failure_kind: None,
            attempts: 0,
            latency_ms: 0.0,
            cost: 0.0,
            usage: Usage::default(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendResponse {
    pub raw: String,
    pub usage: Usage,
}

pub trait ExtractorBackend: Send + Sync {
    fn name(&self) -> &str;

    fn extract(&self, request: &ModelRequest, schema: &ClassSchema) -> Result<BackendResponse>;
}

/// Per-1K-token prices for one backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Price {
    pub price_in: f64,
    pub price_out: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(pub BTreeMap<String, Price>);

impl PriceTable {
    pub fn parse(text: &str) -> Result<Self> {
        let table: PriceTable =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("price table: {e}")))?;
        for (name, p) in &table.0 {
            if !(p.price_in.is_finite()
                && p.price_in >= 0.0
                && p.price_out.is_finite()
                && p.price_out >= 0.0)
            {
                return Err(Error::Validation(format!(
                    "{name}: prices must be nonnegative"
                )));
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_to_string(path.as_ref())?)
    }

    /// Cost of `usage` on `backend`; unknown backends cost nothing.
    pub fn cost(&self, backend: &str, usage: Usage) -> f64 {
        let p = self.0.get(backend).copied().unwrap_or_default();
        usage.input_tokens as f64 / 1000.0 * p.price_in
            + usage.output_tokens as f64 / 1000.0 * p.price_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedOutput {
    pub attributes: Vec<AttributeValue>,
    pub warnings: Vec<String>,
}

fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        if let Some(body) = rest.trim_end().strip_suffix("```") {
            return body.trim();
        }
    }
    t
}

/// Validates a raw backend response against `schema`.
///
/// The response must be a JSON object (optionally inside a ```` ``` ```` fence).
/// Each entry is either a bare value or an envelope
/// `{"value": .., "confidence": .., "bbox": .., "justification": ..}`; bare
/// values get confidence 1.0. Unknown names are dropped with a warning; null
/// values are treated as absent.
pub fn validate_output(raw: &str, schema: &ClassSchema) -> Result<ValidatedOutput> {
    let json: serde_json::Value = serde_json::from_str(strip_code_fence(raw))
        .map_err(|e| Error::Structure(format!("response is not JSON ({e})")))?;
    let obj = json
        .as_object()
        .ok_or_else(|| Error::Structure("response must be a JSON object".into()))?;

    let mut attributes = Vec::new();
    let mut warnings = Vec::new();
    for (name, entry) in obj {
        let Some(attr) = schema.attribute(name) else {
            warnings.push(format!("dropped unknown attribute {name:?}"));
            continue;
        };
        let envelope = entry.as_object().filter(|o| o.contains_key("value"));
        let (raw_value, confidence, bbox, justification) = match envelope {
            Some(env) => {
                let confidence = match env.get("confidence") {
                    None | Some(serde_json::Value::Null) => 1.0,
                    Some(c) => c
                        .as_f64()
                        .filter(|c| (0.0..=1.0).contains(c))
                        .ok_or_else(|| {
                            Error::Structure(format!("{name}: confidence {c} outside [0,1]"))
                        })?,
                };
                let bbox = match env.get("bbox") {
                    None | Some(serde_json::Value::Null) => None,
                    Some(b) => {
                        let b: BoundingBox = serde_json::from_value(b.clone())
                            .map_err(|e| Error::Structure(format!("{name}: bad bbox ({e})")))?;
                        b.check(name).map_err(|e| Error::Structure(e.to_string()))?;
                        Some(b)
                    }
                };
                let justification = env
                    .get("justification")
                    .and_then(|j| j.as_str())
                    .map(str::to_string);
                (&env["value"], confidence, bbox, justification)
            }
            None => (entry, 1.0, None, None),
        };
        let value = Value::from_json(raw_value, attr).map_err(Error::Structure)?;
        if let Some(value) = value {
            attributes.push(AttributeValue {
                name: name.clone(),
                value,
                confidence,
                bbox,
                justification,
                provenance: Provenance::Model,
            });
        }
    }
    // schema order, so results do not depend on response key order
    attributes.sort_by_key(|a| schema.attributes.iter().position(|s| s.name == a.name));
    Ok(ValidatedOutput {
        attributes,
        warnings,
    })
}

/// Backend, pricing and retry settings for [`extract_section`].
pub struct ExtractionContext<'a> {
    pub backend: &'a dyn ExtractorBackend,
    pub prices: &'a PriceTable,
    pub retry: &'a RetryPolicy,
    pub sleeper: &'a dyn Sleeper,
    pub modality: Modality,
    pub few_shot: bool,
    /// Seeds backoff jitter.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionExtraction {
    pub result: ExtractionResult,
    /// Every raw backend response, one per attempt that got one.
    pub raw_responses: Vec<String>,
}

/// Extracts one section. Failures are encoded in the result status, never returned.
pub fn extract_section(
    section: &Section,
    packet: &DocumentPacket,
    schema: &ClassSchema,
    ctx: &ExtractionContext<'_>,
) -> SectionExtraction {
    let started = Instant::now();
    let mut usage = Usage::default();
    let mut raw_responses = Vec::new();

    let request = build_request(section, packet, schema, ctx.modality, ctx.few_shot);
    let (outcome, attempts) = match request {
        Err(e) => (Err(e), 0),
        Ok(request) => with_retry(ctx.retry, ctx.sleeper, ctx.seed, |_| {
            let resp = ctx.backend.extract(&request, schema)?;
            usage += resp.usage;
            let validated = validate_output(&resp.raw, schema);
            raw_responses.push(resp.raw);
            validated
        }),
    };

    let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
    let cost = ctx.prices.cost(ctx.backend.name(), usage);
    let base = ExtractionResult {
        section_id: section.section_id.clone(),
        class_name: section.class_name.clone(),
        attributes: Vec::new(),
        status: ExtractionStatus::Ok,
        failure_reason: None,
        failure_kind: None,
        attempts,
        latency_ms,
        cost,
        usage,
        warnings: Vec::new(),
    };
    let result = match outcome {
        Ok(v) => ExtractionResult {
            attributes: v.attributes,
            warnings: v.warnings,
            ..base
        },
        Err(e) => {
            let kind = match e {
                Error::Structure(_) => FailureKind::Structure,
                Error::Backend(_) => FailureKind::Backend,
                _ => FailureKind::Input,
            };
            let reason = match kind {
                FailureKind::Structure => {
                    format!("invalid output structure after {attempts} attempts: {e}")
                }
                FailureKind::Backend => format!("backend failed after {attempts} attempts: {e}"),
                FailureKind::Input => e.to_string(),
            };
            ExtractionResult {
                status: ExtractionStatus::Failed,
                failure_reason: Some(reason),
                failure_kind: Some(kind),
                ..base
            }
        }
    };
    SectionExtraction {
        result,
        raw_responses,
    }
}

//! Synthetic packet generator.
//!
//! Each class section opens with the class keywords followed by one line per
//! attribute rendered from the attribute's `mock_template`; continuation pages
//! repeat the keywords. Adjacent sections never share a class, and `other`
//! pages carry no keywords. Every generated packet is checked against the
//! keyword classifier and the mock extractor before it is returned.
//!
//! Template placeholders are `{value}` for scalars and `{<field>}` for list
//! records, optionally with a hint: `{value:id}` (code such as `KX-40213`),
//! `{value:name}` (two words, the string default) and `{value:int}` (small
//! integer). A template may carry a low-confidence variant after `;low=`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::SplitSection;
use crate::extraction::{
    build_request, validate_output, ExtractorBackend, MockExtractor, Modality, HIGH_CONFIDENCE,
};
use crate::model::{
    AttributeSchema, BoundingBox, ClassSchema, DocumentPacket, GroundTruth, GroundTruthSection,
    Page, TextLine, Value, ValueKind,
};
use crate::segmentation::{sectionize, KeywordClassifier};
use crate::OTHER_CLASS;

const LOW_MARKER: &str = ";low=";

const WORDS_A: &[&str] = &[
    "Alder",
    "Birch",
    "Cobalt",
    "Dunmore",
    "Ember",
    "Fenwick",
    "Garnet",
    "Harlow",
    "Ivory",
    "Juniper",
    "Kestrel",
    "Larkspur",
    "Marlow",
    "Northgate",
    "Orchard",
    "Pembrook",
    "Quarry",
    "Redwood",
    "Saffron",
    "Thistle",
];
const WORDS_B: &[&str] = &[
    "Supply",
    "Holdings",
    "Works",
    "Trading",
    "Partners",
    "Labs",
    "Foods",
    "Freight",
    "Studio",
    "Outfitters",
    "Mills",
    "Systems",
    "Goods",
    "Hardware",
    "Textiles",
];
const OTHER_LINES: &[&str] = &[
    "Intentionally left blank",
    "Fax transmission sheet",
    "Notes",
    "Attachment follows",
    "Scanned by front desk",
    "Internal routing slip",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub seed: u64,
    pub min_pages: usize,
    pub max_pages: usize,
    /// Probability that an attribute with a low-confidence template variant is rendered with it.
    pub low_confidence_rate: f64,
    /// Probability that the next section is a single unclassifiable page.
    pub other_page_rate: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            count: 10,
            seed: 42,
            min_pages: 3,
            max_pages: 8,
            low_confidence_rate: 0.0,
            other_page_rate: 0.1,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_pages < 1 || self.min_pages > self.max_pages {
            return Err(Error::Validation(format!(
                "pages: need 1 <= min_pages <= max_pages, got {}..{}",
                self.min_pages, self.max_pages
            )));
        }
        for (name, p) in [
            ("low_confidence_rate", self.low_confidence_rate),
            ("other_page_rate", self.other_page_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name}: {p} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPacket {
    pub packet: DocumentPacket,
    pub ground_truth: GroundTruth,
    /// `section index/attribute` for values rendered with the low-confidence variant.
    pub low_confidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub packet_id: String,
    pub pages: usize,
    pub sections: usize,
    pub low_confidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub spec: CorpusSpec,
    pub packets: Vec<CorpusEntry>,
}

struct Template<'a> {
    primary: &'a str,
    low: Option<&'a str>,
}

fn template_of(attr: &AttributeSchema) -> Option<(String, Option<String>)> {
    attr.mock_pattern.as_ref()?;
    let t = attr
        .mock_template
        .clone()
        .unwrap_or_else(|| format!("{}: {{value}}", attr.name));
    Some(match t.split_once(LOW_MARKER) {
        Some((p, l)) => (p.to_string(), Some(l.to_string())),
        None => (t, None),
    })
}

/// Placeholder names and hints in `template`, in order.
fn placeholders(template: &str) -> Vec<(String, Option<String>)> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else {
            break;
        };
        let inner = &rest[start + 1..start + len];
        let (name, hint) = match inner.split_once(':') {
            Some((n, h)) => (n.to_string(), Some(h.to_string())),
            None => (inner.to_string(), None),
        };
        out.push((name, hint));
        rest = &rest[start + len + 1..];
    }
    out
}

fn render(template: &str, values: &BTreeMap<String, String>) -> String {
    let mut out = template.to_string();
    for (name, hint) in placeholders(template) {
        let key = match &hint {
            Some(h) => format!("{{{name}:{h}}}"),
            None => format!("{{{name}}}"),
        };
        out = out.replace(&key, &values[&name]);
    }
    out
}

/// A random value of `kind` as (text as rendered, typed value).
fn gen_value(rng: &mut StdRng, kind: ValueKind, hint: Option<&str>) -> (String, serde_json::Value) {
    match (kind, hint) {
        (ValueKind::Number, Some("int")) => {
            let n: u32 = rng.gen_range(1..=20);
            (n.to_string(), serde_json::json!(f64::from(n)))
        }
        (ValueKind::Number, _) => {
            let cents: u64 = rng.gen_range(1_000..1_000_000);
            let v = cents as f64 / 100.0;
            (format!("{v:.2}"), serde_json::json!(v))
        }
        (ValueKind::Date, _) => {
            let s = format!(
                "{}-{:02}-{:02}",
                rng.gen_range(2019..=2025),
                rng.gen_range(1..=12),
                rng.gen_range(1..=28)
            );
            (s.clone(), serde_json::json!(s))
        }
        (ValueKind::Bbox, _) => {
            let x0: u32 = rng.gen_range(0..50);
            let y0: u32 = rng.gen_range(0..50);
            let x1 = x0 + rng.gen_range(5..45u32);
            let y1 = y0 + rng.gen_range(2..20u32);
            let c = [x0, y0, x1, y1].map(|v| f64::from(v) / 100.0);
            (
                format!("{:.2}, {:.2}, {:.2}, {:.2}", c[0], c[1], c[2], c[3]),
                serde_json::json!(c),
            )
        }
        (_, Some("id")) => {
            let letters: String = (0..2).map(|_| rng.gen_range(b'A'..=b'Z') as char).collect();
            let s = format!("{letters}-{:05}", rng.gen_range(0..100_000));
            (s.clone(), serde_json::json!(s))
        }
        _ => {
            let s = format!(
                "{} {}",
                WORDS_A.choose(rng).expect("nonempty"),
                WORDS_B.choose(rng).expect("nonempty")
            );
            (s.clone(), serde_json::json!(s))
        }
    }
}

fn line(text: String, row: usize, rng: &mut StdRng) -> TextLine {
    let y0 = 0.04 + 0.045 * row as f64;
    let width = (0.012 * text.chars().count() as f64).clamp(0.05, 0.85);
    TextLine {
        confidence: f64::from(rng.gen_range(90..=99u32)),
        bbox: BoundingBox {
            x0: 0.08,
            y0: y0.min(0.95),
            x1: 0.08 + width,
            y1: (y0 + 0.03).min(0.99),
        },
        text,
    }
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct SectionPlan<'a> {
    class: Option<&'a ClassSchema>,
    pages: usize,
}

fn generate_packet(
    classes: &[&ClassSchema],
    spec: &CorpusSpec,
    index: usize,
    rng: &mut StdRng,
) -> GeneratedPacket {
    let packet_id = format!("packet-{index:03}");
    let total = rng.gen_range(spec.min_pages..=spec.max_pages);
    let mut plans: Vec<SectionPlan<'_>> = Vec::new();
    let mut used = 0;
    while used < total {
        let prev = plans
            .last()
            .and_then(|p| p.class)
            .map(|c| c.class_name.as_str());
        let candidates: Vec<&ClassSchema> = classes
            .iter()
            .copied()
            .filter(|c| Some(c.class_name.as_str()) != prev)
            .collect();
        let other = rng.gen::<f64>() < spec.other_page_rate || candidates.is_empty();
        if other {
            plans.push(SectionPlan {
                class: None,
                pages: 1,
            });
            used += 1;
        } else {
            let class = *candidates.choose(rng).expect("nonempty");
            let pages = rng.gen_range(1..=(total - used).min(3));
            plans.push(SectionPlan {
                class: Some(class),
                pages,
            });
            used += pages;
        }
    }

    let mut pages = Vec::new();
    let mut gt_sections = Vec::new();
    let mut low_confidence = Vec::new();
    for (k, plan) in plans.iter().enumerate() {
        let first = pages.len();
        let Some(class) = plan.class else {
            let n = rng.gen_range(1..=2);
            let lines = OTHER_LINES
                .choose_multiple(rng, n)
                .enumerate()
                .map(|(row, t)| line(t.to_string(), row, rng))
                .collect();
            pages.push(Page {
                index: first,
                image_ref: Some(format!("images/{packet_id}/page-{first}.png")),
                lines,
            });
            gt_sections.push(GroundTruthSection {
                class_name: OTHER_CLASS.into(),
                pages: vec![first],
                attributes: Default::default(),
            });
            continue;
        };

        let header: Vec<String> = class.keywords.iter().map(|kw| title_case(kw)).collect();
        let mut body = Vec::new();
        let mut attributes = serde_json::Map::new();
        for attr in &class.attributes {
            let Some((primary, low)) = template_of(attr) else {
                continue;
            };
            // drawn for every attribute so the low rate does not shift later draws
            let use_low = rng.gen::<f64>() < spec.low_confidence_rate && low.is_some();
            let template = Template {
                primary: &primary,
                low: low.as_deref(),
            };
            let chosen = if use_low {
                template.low.expect("checked")
            } else {
                template.primary
            };
            if use_low {
                low_confidence.push(format!("{k}/{}", attr.name));
            }
            if attr.value_kind == ValueKind::List {
                let n = rng.gen_range(1..=3);
                let mut records = Vec::new();
                for _ in 0..n {
                    let mut texts = BTreeMap::new();
                    let mut record = serde_json::Map::new();
                    for (name, hint) in placeholders(chosen) {
                        let Some(field) = attr.field(&name) else {
                            continue;
                        };
                        let (text, value) = gen_value(rng, field.value_kind, hint.as_deref());
                        texts.insert(name.clone(), text);
                        record.insert(name, value);
                    }
                    body.push(render(chosen, &texts));
                    records.push(serde_json::Value::Object(record));
                }
                attributes.insert(attr.name.clone(), serde_json::Value::Array(records));
            } else {
                let hint = placeholders(chosen)
                    .into_iter()
                    .find(|(n, _)| n == "value")
                    .and_then(|(_, h)| h);
                let (text, value) = gen_value(rng, attr.value_kind, hint.as_deref());
                body.push(render(
                    chosen,
                    &BTreeMap::from([("value".to_string(), text)]),
                ));
                attributes.insert(attr.name.clone(), value);
            }
        }

        for p in 0..plan.pages {
            let mut texts = header.clone();
            if p == 0 {
                texts.extend(body.iter().cloned());
            } else {
                texts.push(format!("(continued, sheet {})", p + 1));
            }
            let index = pages.len();
            pages.push(Page {
                index,
                image_ref: Some(format!("images/{packet_id}/page-{index}.png")),
                lines: texts
                    .into_iter()
                    .enumerate()
                    .map(|(row, t)| line(t, row, rng))
                    .collect(),
            });
        }
        gt_sections.push(GroundTruthSection {
            class_name: class.class_name.clone(),
            pages: (first..pages.len()).collect(),
            attributes,
        });
    }

    GeneratedPacket {
        ground_truth: GroundTruth {
            packet_id: packet_id.clone(),
            sections: gt_sections,
        },
        packet: DocumentPacket {
            packet_id,
            pages,
            source_path: String::new(),
        },
        low_confidence,
    }
}

/// Checks that the keyword classifier and the mock extractor recover exactly
/// the ground truth of `g`.
fn self_check(g: &GeneratedPacket, classes: &[ClassSchema]) -> Result<()> {
    let id = &g.packet.packet_id;
    let fail =
        |msg: String| Error::Validation(format!("generator self-check failed for {id}: {msg}"));
    let sections = sectionize(&g.packet, classes, &KeywordClassifier)?;
    let predicted: Vec<SplitSection> = sections.iter().map(SplitSection::from).collect();
    let expected: Vec<SplitSection> = g
        .ground_truth
        .sections
        .iter()
        .map(SplitSection::from)
        .collect();
    if predicted != expected {
        return Err(fail(format!("split {predicted:?} != {expected:?}")));
    }
    let mut low = Vec::new();
    for (k, (s, gt)) in sections.iter().zip(&g.ground_truth.sections).enumerate() {
        if s.class_name == OTHER_CLASS {
            continue;
        }
        let schema = classes
            .iter()
            .find(|c| c.class_name == s.class_name)
            .expect("classifier returns configured classes");
        let request = build_request(s, &g.packet, schema, Modality::Ocr, false)?;
        let raw = MockExtractor.extract(&request, schema)?.raw;
        let out = validate_output(&raw, schema)?;
        let got: BTreeMap<String, Value> = out
            .attributes
            .iter()
            .map(|a| (a.name.clone(), a.value.clone()))
            .collect();
        let want = gt.typed_attributes(schema)?;
        if got != want {
            return Err(fail(format!(
                "section {k}: extracted {got:?}, expected {want:?}"
            )));
        }
        low.extend(
            out.attributes
                .iter()
                .filter(|a| a.confidence < HIGH_CONFIDENCE)
                .map(|a| format!("{k}/{}", a.name)),
        );
    }
    if low != g.low_confidence {
        return Err(fail(format!(
            "low-confidence attributes {low:?} != {:?}",
            g.low_confidence
        )));
    }
    Ok(())
}

/// Generates `spec.count` packets. Identical inputs give identical output.
pub fn generate_corpus(classes: &[ClassSchema], spec: &CorpusSpec) -> Result<Vec<GeneratedPacket>> {
    spec.validate()?;
    let usable: Vec<&ClassSchema> = classes
        .iter()
        .filter(|c| c.class_name != OTHER_CLASS && !c.keywords.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::Validation(
            "classes: the generator needs at least one class with keywords".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let g = generate_packet(&usable, spec, i, &mut rng);
        self_check(&g, classes)?;
        out.push(g);
    }
    Ok(out)
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("corpus values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `packets/`, `ground_truth/`, `manifest.csv` and `corpus.json` under `out`.
pub fn write_corpus(
    out: &Path,
    spec: &CorpusSpec,
    corpus: &[GeneratedPacket],
) -> Result<CorpusSummary> {
    for dir in ["packets", "ground_truth"] {
        let d = out.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut manifest = String::from("document_path,ground_truth_path\n");
    let mut entries = Vec::new();
    for g in corpus {
        let id = &g.packet.packet_id;
        write_pretty(&out.join("packets").join(format!("{id}.json")), &g.packet)?;
        write_pretty(
            &out.join("ground_truth").join(format!("{id}.json")),
            &g.ground_truth,
        )?;
        manifest.push_str(&format!("packets/{id}.json,ground_truth/{id}.json\n"));
        entries.push(CorpusEntry {
            packet_id: id.clone(),
            pages: g.packet.pages.len(),
            sections: g.ground_truth.sections.len(),
            low_confidence: g.low_confidence.clone(),
        });
    }
    let path = out.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    let summary = CorpusSummary {
        spec: spec.clone(),
        packets: entries,
    };
    write_pretty(&out.join("corpus.json"), &summary)?;
    Ok(summary)
}

//! Page classification and BIO decoding of page labels into sections.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassSchema, DocumentPacket};
use crate::OTHER_CLASS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    B,
    I,
    O,
}

/// A page label: `B-<class>`, `I-<class>` or `O`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BioLabel {
    tag: BioTag,
    class_name: String,
}

impl BioLabel {
    pub fn begin(class_name: impl Into<String>) -> Self {
        Self::tagged(BioTag::B, class_name.into())
    }

    pub fn inside(class_name: impl Into<String>) -> Self {
        Self::tagged(BioTag::I, class_name.into())
    }

    pub fn outside() -> Self {
        BioLabel {
            tag: BioTag::O,
            class_name: String::new(),
        }
    }

    // An empty class cannot carry a B/I tag, so it collapses to O.
    fn tagged(tag: BioTag, class_name: String) -> Self {
        if class_name.is_empty() {
            Self::outside()
        } else {
            BioLabel { tag, class_name }
        }
    }

    pub fn tag(&self) -> BioTag {
        self.tag
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag {
            BioTag::O => f.write_str("O"),
            BioTag::B => write!(f, "B-{}", self.class_name),
            BioTag::I => write!(f, "I-{}", self.class_name),
        }
    }
}

impl FromStr for BioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Self::outside());
        }
        let (tag, class) = s.split_once('-').ok_or_else(|| {
            Error::Parse(format!(
                "bio label {s:?}: expected O, B-<class> or I-<class>"
            ))
        })?;
        if class.is_empty() {
            return Err(Error::Parse(format!("bio label {s:?}: empty class")));
        }
        match tag {
            "B" => Ok(Self::begin(class)),
            "I" => Ok(Self::inside(class)),
            _ => Err(Error::Parse(format!(
                "bio label {s:?}: unknown tag {tag:?}"
            ))),
        }
    }
}

impl TryFrom<String> for BioLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BioLabel> for String {
    fn from(l: BioLabel) -> Self {
        l.to_string()
    }
}

/// A contiguous run of pages with one document class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub section_id: String,
    pub class_name: String,
    pub page_indices: Vec<usize>,
}

impl Section {
    pub fn first_page(&self) -> usize {
        self.page_indices[0]
    }
}

pub struct ClassifyRequest<'a> {
    pub packet_id: &'a str,
    pub page_index: usize,
    pub page_text: &'a str,
    pub image_ref: Option<&'a str>,
    /// Text of the preceding page, so a backend can decide B versus I without
    /// seeing its own earlier answers.
    pub previous_page_text: Option<&'a str>,
    pub classes: &'a [ClassSchema],
}

pub trait ClassifierBackend: Send + Sync {
    fn name(&self) -> &str;

    fn classify(&self, request: &ClassifyRequest<'_>) -> Result<BioLabel>;
}

/// Scores each class by the number of its keywords present in `text`
/// (case-insensitive). Ties go to the earlier class; no hits means `None`.
pub fn keyword_class<'a>(text: &str, classes: &'a [ClassSchema]) -> Option<&'a str> {
    let lower = text.to_lowercase();
    let mut best: Option<(&str, usize)> = None;
    for class in classes {
        if class.class_name == OTHER_CLASS {
            continue;
        }
        let score = class
            .keywords
            .iter()
            .filter(|k| !k.is_empty() && lower.contains(&k.to_lowercase()))
            .count();
        if score > 0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((&class.class_name, score));
        }
    }
    best.map(|(c, _)| c)
}

/// Deterministic keyword-matching classifier. Ignores class descriptions.
#[derive(Debug, Default, Clone, Copy)]
pub struct KeywordClassifier;

impl ClassifierBackend for KeywordClassifier {
    fn name(&self) -> &str {
        "keyword"
    }

    fn classify(&self, req: &ClassifyRequest<'_>) -> Result<BioLabel> {
        let Some(class) = keyword_class(req.page_text, req.classes) else {
            return Ok(BioLabel::outside());
        };
        let previous = req
            .previous_page_text
            .and_then(|t| keyword_class(t, req.classes));
        Ok(if previous == Some(class) {
            BioLabel::inside(class)
        } else {
            BioLabel::begin(class)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<BioLabel>,
    pub warnings: Vec<String>,
}

/// Labels every page of `packet`, calling the backend on up to `concurrency` pages at once.
///
/// Labels naming a class absent from `classes` are coerced to `O` with a warning.
pub fn classify_pages(
    packet: &DocumentPacket,
    classes: &[ClassSchema],
    backend: &dyn ClassifierBackend,
    concurrency: usize,
) -> Result<Classification> {
    if classes.is_empty() {
        return Err(Error::Validation(
            "classes: at least one class is required".into(),
        ));
    }
    let texts: Vec<String> = packet.pages.iter().map(|p| p.text()).collect();
    let n = texts.len();
    let slots: Vec<Mutex<Option<Result<BioLabel>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= n {
            break;
        }
        let req = ClassifyRequest {
            packet_id: &packet.packet_id,
            page_index: i,
            page_text: &texts[i],
            image_ref: packet.pages[i].image_ref.as_deref(),
            previous_page_text: i.checked_sub(1).map(|p| texts[p].as_str()),
            classes,
        };
        *slots[i].lock().unwrap() = Some(backend.classify(&req));
    };
    let workers = concurrency.clamp(1, n.max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut labels = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        let label = slot
            .into_inner()
            .unwrap()
            .expect("every page is classified")?;
        let known = label.tag == BioTag::O
            || label.class_name == OTHER_CLASS
            || classes.iter().any(|c| c.class_name == label.class_name);
        if known {
            labels.push(label);
        } else {
            warnings.push(format!(
                "page {i}: backend {} returned unconfigured class {:?}; coerced to O",
                backend.name(),
                label.class_name
            ));
            labels.push(BioLabel::outside());
        }
    }
    Ok(Classification { labels, warnings })
}

/// Decodes page labels into sections covering every page exactly once.
///
/// Repairs: a leading `I`, or an `I` whose class differs from the open section,
/// starts a new section. `O` pages (and labels of the reserved class) become
/// singleton sections of class `other`.
pub fn decode_bio(labels: &[BioLabel]) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    // whether the last section may be extended by an I label
    let mut open = false;
    for (page, label) in labels.iter().enumerate() {
        let outside = label.tag == BioTag::O || label.class_name == OTHER_CLASS;
        if outside {
            sections.push(Section {
                section_id: String::new(),
                class_name: OTHER_CLASS.to_string(),
                page_indices: vec![page],
            });
            open = false;
            continue;
        }
        let extends = label.tag == BioTag::I
            && open
            && sections
                .last()
                .is_some_and(|s| s.class_name == label.class_name);
        if extends {
            sections.last_mut().unwrap().page_indices.push(page);
        } else {
            sections.push(Section {
                section_id: String::new(),
                class_name: label.class_name.clone(),
                page_indices: vec![page],
            });
            open = true;
        }
    }
    for (k, s) in sections.iter_mut().enumerate() {
        s.section_id = format!("sec-{k:03}");
    }
    sections
}

/// Inverse of [`decode_bio`] for well-formed sections.
pub fn encode_sections(sections: &[Section]) -> Vec<BioLabel> {
    let mut out = Vec::new();
    for s in sections {
        for (k, _) in s.page_indices.iter().enumerate() {
            out.push(if s.class_name == OTHER_CLASS {
                BioLabel::outside()
            } else if k == 0 {
                BioLabel::begin(&s.class_name)
            } else {
                BioLabel::inside(&s.class_name)
            });
        }
    }
    out
}

pub fn sectionize(
    packet: &DocumentPacket,
    classes: &[ClassSchema],
    backend: &dyn ClassifierBackend,
) -> Result<Vec<Section>> {
    let c = classify_pages(packet, classes, backend, 1)?;
    Ok(decode_bio(&c.labels))
}

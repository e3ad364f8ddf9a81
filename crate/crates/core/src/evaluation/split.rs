use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GroundTruthSection;
use crate::segmentation::Section;

/// A section for split scoring; `pages` keeps its given order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSection {
    pub class_name: String,
    pub pages: Vec<usize>,
}

impl SplitSection {
    pub fn new(class_name: impl Into<String>, pages: Vec<usize>) -> Self {
        SplitSection {
            class_name: class_name.into(),
            pages,
        }
    }
}

impl From<&Section> for SplitSection {
    fn from(s: &Section) -> Self {
        SplitSection::new(&s.class_name, s.page_indices.clone())
    }
}

impl From<&GroundTruthSection> for SplitSection {
    fn from(s: &GroundTruthSection) -> Self {
        SplitSection::new(&s.class_name, s.pages.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSplit {
    pub packet_id: String,
    pub pages: usize,
    pub correct_pages: usize,
    pub gt_sections: usize,
    pub ordered_matches: usize,
    pub unordered_matches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub page_accuracy: f64,
    pub ordered_accuracy: f64,
    pub unordered_accuracy: f64,
    pub packets: Vec<PacketSplit>,
}

fn page_classes<'a>(
    sections: &'a [SplitSection],
    page_count: usize,
    side: &str,
) -> Result<Vec<&'a str>> {
    let mut owner: Vec<Option<&str>> = vec![None; page_count];
    for s in sections {
        if s.pages.is_empty() {
            return Err(Error::Partition(format!(
                "{side}: empty section of class {:?}",
                s.class_name
            )));
        }
        for &p in &s.pages {
            let slot = owner.get_mut(p).ok_or_else(|| {
                Error::Partition(format!("{side}: page {p} outside 0..{page_count}"))
            })?;
            if slot.is_some() {
                return Err(Error::Partition(format!("{side}: page {p} appears twice")));
            }
            *slot = Some(&s.class_name);
        }
    }
    owner
        .into_iter()
        .enumerate()
        .map(|(p, o)| o.ok_or_else(|| Error::Partition(format!("{side}: page {p} is not covered"))))
        .collect()
}

/// Greedy one-to-one matching in predicted order; returns the match count.
fn greedy_matches(
    gt: &[SplitSection],
    pred: &[SplitSection],
    same: impl Fn(&SplitSection, &SplitSection) -> bool,
) -> usize {
    let mut used = vec![false; gt.len()];
    let mut count = 0;
    for p in pred {
        if let Some(k) = (0..gt.len()).find(|&k| !used[k] && same(&gt[k], p)) {
            used[k] = true;
            count += 1;
        }
    }
    count
}

/// Scores one packet's predicted split against its ground truth.
pub fn split_metrics(
    packet_id: &str,
    gt: &[SplitSection],
    pred: &[SplitSection],
    page_count: usize,
) -> Result<PacketSplit> {
    let gt_pages = page_classes(gt, page_count, "ground truth")?;
    let pred_pages = page_classes(pred, page_count, "prediction")?;
    let correct_pages = gt_pages
        .iter()
        .zip(&pred_pages)
        .filter(|(a, b)| a == b)
        .count();
    let ordered_matches = greedy_matches(gt, pred, |g, p| {
        g.class_name == p.class_name && g.pages == p.pages
    });
    let unordered_matches = greedy_matches(gt, pred, |g, p| {
        g.class_name == p.class_name
            && g.pages.iter().collect::<BTreeSet<_>>() == p.pages.iter().collect::<BTreeSet<_>>()
    });
    Ok(PacketSplit {
        packet_id: packet_id.to_string(),
        pages: page_count,
        correct_pages,
        gt_sections: gt.len(),
        ordered_matches,
        unordered_matches,
    })
}

/// Micro-aggregates packets by total pages and total ground-truth sections.
pub fn aggregate_splits(packets: Vec<PacketSplit>) -> SplitReport {
    let pages: usize = packets.iter().map(|p| p.pages).sum();
    let correct: usize = packets.iter().map(|p| p.correct_pages).sum();
    let sections: usize = packets.iter().map(|p| p.gt_sections).sum();
    let ordered: usize = packets.iter().map(|p| p.ordered_matches).sum();
    let unordered: usize = packets.iter().map(|p| p.unordered_matches).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    SplitReport {
        page_accuracy: ratio(correct, pages),
        ordered_accuracy: ratio(ordered, sections),
        unordered_accuracy: ratio(unordered, sections),
        packets,
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::assessment::{ConfidenceReport, Correction, ReviewDecision, RoutingDecision};
use crate::error::Error;
use crate::extraction::{ExtractionResult, SectionExtraction};
use crate::rules::Determination;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Queued,
    Classifying,
    Splitting,
    Extracting,
    Assessing,
    AwaitingReview,
    Validating,
    Complete,
    Failed,
    DeadLettered,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Queued,
        Stage::Classifying,
        Stage::Splitting,
        Stage::Extracting,
        Stage::Assessing,
        Stage::AwaitingReview,
        Stage::Validating,
        Stage::Complete,
        Stage::Failed,
        Stage::DeadLettered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Queued => "queued",
            Stage::Classifying => "classifying",
            Stage::Splitting => "splitting",
            Stage::Extracting => "extracting",
            Stage::Assessing => "assessing",
            Stage::AwaitingReview => "awaiting_review",
            Stage::Validating => "validating",
            Stage::Complete => "complete",
            Stage::Failed => "failed",
            Stage::DeadLettered => "dead_lettered",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Stage::Complete | Stage::Failed | Stage::DeadLettered)
    }

    /// Whether the job is at rest: terminal or waiting for a reviewer.
    pub fn is_at_rest(self) -> bool {
        self.is_terminal() || self == Stage::AwaitingReview
    }

    /// The edges of the stage graph.
    pub fn can_transition_to(self, next: Stage) -> bool {
        use Stage::*;
        if self.is_terminal() {
            return false;
        }
        // any running stage may fail or dead-letter
        if matches!(next, Failed | DeadLettered) {
            return true;
        }
        matches!(
            (self, next),
            (Queued, Classifying)
                | (Classifying, Splitting)
                | (Splitting, Extracting)
                | (Extracting, Assessing)
                | (Assessing, AwaitingReview)
                | (Assessing, Validating)
                | (AwaitingReview, Validating)
                | (Validating, Complete)
        )
    }

    /// Name of the worker queue serving this stage, if any.
    pub fn queue(self) -> Option<QueueName> {
        match self {
            Stage::Queued | Stage::Classifying => Some(QueueName::Classify),
            Stage::Splitting => Some(QueueName::Split),
            Stage::Extracting => Some(QueueName::Extract),
            Stage::Assessing => Some(QueueName::Assess),
            Stage::Validating => Some(QueueName::Validate),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueName {
    Classify,
    Split,
    Extract,
    Assess,
    Validate,
}

impl QueueName {
    pub const ALL: [QueueName; 5] = [
        QueueName::Classify,
        QueueName::Split,
        QueueName::Extract,
        QueueName::Assess,
        QueueName::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueueName::Classify => "classify",
            QueueName::Split => "split",
            QueueName::Extract => "extract",
            QueueName::Assess => "assess",
            QueueName::Validate => "validate",
        }
    }
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub packet_id: String,
    pub stage: Stage,
    /// Attempts used per executed stage.
    #[serde(default)]
    pub attempts: BTreeMap<String, u32>,
    /// Stage name → output file, relative to the job directory.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    /// Wall-clock time spent per stage.
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(default)]
    pub errors: Vec<String>,
}

impl JobRecord {
    pub fn new(job_id: impl Into<String>, packet_id: impl Into<String>) -> Self {
        let now = now_millis();
        JobRecord {
            job_id: job_id.into(),
            packet_id: packet_id.into(),
            stage: Stage::Queued,
            attempts: BTreeMap::new(),
            outputs: BTreeMap::new(),
            created_at_ms: now,
            updated_at_ms: now,
            timings_ms: BTreeMap::new(),
            errors: Vec::new(),
        }
    }

    /// Moves to `next`, refusing edges outside the stage graph.
    pub fn advance(&mut self, next: Stage) -> Result<(), Error> {
        if !self.stage.can_transition_to(next) {
            return Err(Error::Validation(format!(
                "job {}: illegal transition {} -> {}",
                self.job_id, self.stage, next
            )));
        }
        self.stage = next;
        self.updated_at_ms = now_millis();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetterRecord {
    pub job_id: String,
    pub stage: Stage,
    pub error: String,
    pub attempts: u32,
    pub timestamp_ms: u64,
    /// Path of the job's intake copy of the packet.
    pub payload_ref: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSummary {
    pub min_attribute_confidence: f64,
    pub flagged_attributes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterminationSummary {
    pub pass: usize,
    pub fail: usize,
    pub information_not_found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionEvent {
    pub job_id: String,
    pub packet_id: String,
    pub status: Stage,
    pub result_locations: Vec<String>,
    pub confidence: ConfidenceSummary,
    pub determinations: DeterminationSummary,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractOutput {
    pub sections: Vec<SectionExtraction>,
}

impl ExtractOutput {
    pub fn results(&self) -> Vec<ExtractionResult> {
        self.sections.iter().map(|s| s.result.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessOutput {
    pub reports: Vec<ConfidenceReport>,
    /// Packet-level routing; trigger attributes are `section_id/attribute`.
    pub routing: RoutingDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewOutput {
    pub decision: ReviewDecision,
    pub results: Vec<ExtractionResult>,
    pub corrections: Vec<Correction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule_id: String,
    #[serde(flatten)]
    pub determination: Determination,
}

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::job::*;
use super::retry::{with_retry, RetryPolicy, Sleeper};
use super::store::JobStore;
use crate::assessment::{
    apply_review, assess, route, CorrectionRecord, ReviewDecision, RoutingDecision, RoutingOutcome,
    DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::extraction::{
    extract_section, ExtractionContext, ExtractionResult, ExtractorBackend, FailureKind, Modality,
    PriceTable,
};
use crate::model::{load_packet, BoundingBox, ClassSchema, DocumentPacket, TextLine, Value};
use crate::rules::{validate_all, DeterminationStatus, RuleSpec};
use crate::segmentation::{classify_pages, decode_bio, Classification, ClassifierBackend, Section};
use crate::OTHER_CLASS;

/// Maximum concurrent tasks per stage queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageLimits {
    pub classify: usize,
    pub split: usize,
    pub extract: usize,
    pub assess: usize,
    pub validate: usize,
}

impl Default for StageLimits {
    fn default() -> Self {
        StageLimits {
            classify: 2,
            split: 2,
            extract: 2,
            assess: 2,
            validate: 2,
        }
    }
}

impl StageLimits {
    pub fn uniform(n: usize) -> Self {
        StageLimits {
            classify: n,
            split: n,
            extract: n,
            assess: n,
            validate: n,
        }
    }

    pub fn get(&self, q: QueueName) -> usize {
        match q {
            QueueName::Classify => self.classify,
            QueueName::Split => self.split,
            QueueName::Extract => self.extract,
            QueueName::Assess => self.assess,
            QueueName::Validate => self.validate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for q in QueueName::ALL {
            if self.get(q) < 1 {
                return Err(Error::Validation(format!(
                    "stage_limits.{}: must be >= 1",
                    q.as_str()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub hitl_enabled: bool,
    pub threshold: f64,
    pub retry: RetryPolicy,
    pub stage_limits: StageLimits,
    pub modality: Modality,
    pub few_shot: bool,
    /// Pages classified concurrently within one job.
    pub classify_concurrency: usize,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            hitl_enabled: true,
            threshold: DEFAULT_THRESHOLD,
            retry: RetryPolicy::default(),
            stage_limits: StageLimits::default(),
            modality: Modality::Ocr,
            few_shot: false,
            classify_concurrency: 4,
        }
    }
}

impl EngineSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Validation(format!(
                "threshold: {} outside [0,1]",
                self.threshold
            )));
        }
        if self.classify_concurrency < 1 {
            return Err(Error::Validation(
                "classify_concurrency: must be >= 1".into(),
            ));
        }
        self.retry.validate()?;
        self.stage_limits.validate()
    }
}

/// Configuration and backends the engine runs with.
pub struct Components {
    pub classes: Vec<ClassSchema>,
    pub rules: Vec<RuleSpec>,
    pub prices: PriceTable,
    pub classifier: Arc<dyn ClassifierBackend>,
    pub extractor: Arc<dyn ExtractorBackend>,
    pub sleeper: Arc<dyn Sleeper>,
}

/// An attribute awaiting a reviewer's decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedAttribute {
    pub section_id: String,
    pub class_name: String,
    pub attribute: String,
    pub value: Value,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub job_id: String,
    pub packet_id: String,
    pub updated_at_ms: u64,
    pub flagged: Vec<FlaggedAttribute>,
}

/// Everything a job produced so far, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intermediates {
    pub job_id: String,
    pub stage: Stage,
    /// Per page: OCR lines.
    pub ocr: Vec<Vec<TextLine>>,
    pub classification: Option<Classification>,
    pub sections: Option<Vec<Section>>,
    /// Per extracted section: every raw backend response.
    pub raw_outputs: Option<Vec<(String, Vec<String>)>>,
    pub extraction: Option<Vec<ExtractionResult>>,
    pub assessment: Option<AssessOutput>,
    pub determinations: Option<Vec<RuleOutcome>>,
    pub dead_letter: Option<DeadLetterRecord>,
    pub errors: Vec<String>,
}

pub const INTAKE: &str = "intake";
pub const CLASSIFY: &str = "classify";
pub const SPLIT: &str = "split";
pub const EXTRACT: &str = "extract";
pub const ASSESS: &str = "assess";
pub const REVIEW: &str = "review";
pub const VALIDATE: &str = "validate";

pub struct Engine {
    store: JobStore,
    parts: Components,
    settings: EngineSettings,
    config_hash: String,
}

impl Engine {
    pub fn new(store: JobStore, parts: Components, settings: EngineSettings) -> Result<Self> {
        settings.validate()?;
        if parts.classes.is_empty() {
            return Err(Error::Validation(
                "classes: at least one class is required".into(),
            ));
        }
        let config_hash = config_hash(&parts, &settings);
        Ok(Engine {
            store,
            parts,
            settings,
            config_hash,
        })
    }

    pub fn store(&self) -> &JobStore {
        &self.store
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn classes(&self) -> &[ClassSchema] {
        &self.parts.classes
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn extractor_name(&self) -> &str {
        self.parts.extractor.name()
    }

    /// Deterministic id for a packet under this engine's configuration.
    pub fn job_id_for(&self, packet_id: &str) -> String {
        let mut h = Sha256::new();
        h.update(packet_id.as_bytes());
        h.update([0u8]);
        h.update(self.config_hash.as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }

    fn schema(&self, class: &str) -> Option<&ClassSchema> {
        self.parts.classes.iter().find(|c| c.class_name == class)
    }

    pub fn submit(&self, packet_path: impl AsRef<Path>) -> Result<String> {
        self.submit_packet(&load_packet(packet_path)?)
    }

    /// Registers `packet` at `queued`. Submitting the same packet again returns
    /// the existing job id without touching the job.
    pub fn submit_packet(&self, packet: &DocumentPacket) -> Result<String> {
        packet.validate()?;
        let job_id = self.job_id_for(&packet.packet_id);
        let lock = self.store.job_lock(&job_id);
        let _guard = lock.lock().unwrap();
        if self.store.has_record(&job_id) {
            return Ok(job_id);
        }
        self.store
            .write_json(&self.store.stage_path(&job_id, INTAKE), packet)?;
        let mut record = JobRecord::new(&job_id, &packet.packet_id);
        record.outputs.insert(INTAKE.into(), stage_file(INTAKE));
        self.store.save_record(&record)?;
        log::info!("submitted packet {} as job {job_id}", packet.packet_id);
        Ok(job_id)
    }

    pub fn record(&self, job_id: &str) -> Result<JobRecord> {
        self.store.load_record(job_id)
    }

    /// Executes the job's current stage and persists the result.
    pub fn step(&self, job_id: &str) -> Result<JobRecord> {
        let lock = self.store.job_lock(job_id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load_record(job_id)?;
        self.step_locked(&mut rec)?;
        Ok(rec)
    }

    /// Steps the job until it is terminal or awaiting review.
    pub fn run(&self, job_id: &str) -> Result<JobRecord> {
        let mut rec = self.record(job_id)?;
        while !rec.stage.is_at_rest() {
            rec = self.step(job_id)?;
        }
        Ok(rec)
    }

    /// Repairs the store after a restart and lists the jobs that still need to
    /// run: corrupt records become failed jobs, review decisions persisted but
    /// not yet applied are completed, and at-rest jobs are skipped.
    pub fn pending_jobs(&self) -> Result<Vec<String>> {
        let mut pending = Vec::new();
        for id in self.store.job_ids()? {
            let lock = self.store.job_lock(&id);
            let _guard = lock.lock().unwrap();
            let mut rec = match self.store.load_record(&id) {
                Ok(r) => r,
                Err(e @ Error::Parse(_)) => {
                    self.fail_corrupt(&id, &e)?;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if rec.stage == Stage::AwaitingReview {
                if let Some(out) = self
                    .store
                    .read_optional_json::<ReviewOutput>(&self.path(&id, REVIEW))?
                {
                    self.finish_review(&mut rec, &out)?;
                }
            }
            if !rec.stage.is_at_rest() {
                pending.push(id);
            }
        }
        Ok(pending)
    }

    /// Runs every pending job to rest; returns their ids.
    pub fn resume_pending(&self) -> Result<Vec<String>> {
        let ids = self.pending_jobs()?;
        for id in &ids {
            self.run(id)?;
        }
        Ok(ids)
    }

    fn fail_corrupt(&self, job_id: &str, err: &Error) -> Result<()> {
        let packet_id = self
            .store
            .read_optional_json::<DocumentPacket>(&self.path(job_id, INTAKE))
            .ok()
            .flatten()
            .map(|p| p.packet_id)
            .unwrap_or_default();
        let mut rec = JobRecord::new(job_id, packet_id);
        rec.stage = Stage::Failed;
        rec.errors.push(format!("corrupt job record: {err}"));
        log::warn!("job {job_id}: {}", rec.errors[0]);
        self.store.append_event(&self.completion_event(&rec)?)?;
        self.store.save_record(&rec)
    }

    fn path(&self, job_id: &str, name: &str) -> std::path::PathBuf {
        self.store.stage_path(job_id, name)
    }

    fn seed(&self, job_id: &str) -> u64 {
        u64::from_str_radix(&job_id[..16.min(job_id.len())], 16).unwrap_or(0)
    }

    pub fn packet(&self, job_id: &str) -> Result<DocumentPacket> {
        self.store.read_json(&self.path(job_id, INTAKE))
    }

    fn step_locked(&self, rec: &mut JobRecord) -> Result<()> {
        if rec.stage.is_at_rest() {
            return Ok(());
        }
        if let Some(dl) = self
            .store
            .read_optional_json::<DeadLetterRecord>(&self.store.dead_letter_path(&rec.job_id))?
        {
            return self.finish_dead_letter(rec, dl);
        }
        let started = Instant::now();
        let (name, next) = match rec.stage {
            Stage::Queued => {
                rec.advance(Stage::Classifying)?;
                return self.store.save_record(rec);
            }
            Stage::Classifying => match self.run_classify(rec)? {
                Some(_) => (CLASSIFY, Stage::Splitting),
                None => return Ok(()),
            },
            Stage::Splitting => {
                self.run_split(rec)?;
                (SPLIT, Stage::Extracting)
            }
            Stage::Extracting => match self.run_extract(rec)? {
                Some(_) => (EXTRACT, Stage::Assessing),
                None => return Ok(()),
            },
            Stage::Assessing => {
                let out = self.run_assess(rec)?;
                let next = match out.routing.outcome {
                    RoutingOutcome::Review => Stage::AwaitingReview,
                    RoutingOutcome::AutoApprove => Stage::Validating,
                };
                (ASSESS, next)
            }
            Stage::Validating => {
                let results = self.run_validate(rec)?;
                rec.outputs.insert(VALIDATE.into(), stage_file(VALIDATE));
                *rec.timings_ms.entry(VALIDATE.into()).or_default() +=
                    started.elapsed().as_secs_f64() * 1e3;
                let failed: Vec<String> = results
                    .iter()
                    .filter(|r| !r.is_ok())
                    .map(|r| {
                        format!(
                            "section {}: {}",
                            r.section_id,
                            r.failure_reason.as_deref().unwrap_or("extraction failed")
                        )
                    })
                    .collect();
                let status = if failed.is_empty() {
                    Stage::Complete
                } else {
                    Stage::Failed
                };
                rec.errors.extend(failed);
                return self.finish(rec, status);
            }
            Stage::AwaitingReview | Stage::Complete | Stage::Failed | Stage::DeadLettered => {
                unreachable!()
            }
        };
        rec.outputs.insert(name.into(), stage_file(name));
        *rec.timings_ms.entry(name.into()).or_default() += started.elapsed().as_secs_f64() * 1e3;
        rec.advance(next)?;
        self.store.save_record(rec)
    }

    /// Returns `None` when the job left the normal path (dead-lettered or failed).
    fn run_classify(&self, rec: &mut JobRecord) -> Result<Option<Classification>> {
        let path = self.path(&rec.job_id, CLASSIFY);
        if let Some(c) = self.store.read_optional_json(&path)? {
            return Ok(Some(c));
        }
        let packet = self.packet(&rec.job_id)?;
        let (outcome, attempts) = with_retry(
            &self.settings.retry,
            self.parts.sleeper.as_ref(),
            self.seed(&rec.job_id),
            |_| {
                classify_pages(
                    &packet,
                    &self.parts.classes,
                    self.parts.classifier.as_ref(),
                    self.settings.classify_concurrency,
                )
            },
        );
        rec.attempts.insert(CLASSIFY.into(), attempts);
        match outcome {
            Ok(c) => {
                for w in &c.warnings {
                    log::warn!("job {}: {w}", rec.job_id);
                }
                self.store.write_json(&path, &c)?;
                Ok(Some(c))
            }
            Err(e) if e.is_retryable() => {
                self.dead_letter(rec, Stage::Classifying, e.to_string(), attempts)?;
                Ok(None)
            }
            Err(e) => {
                rec.errors.push(format!("classify: {e}"));
                self.finish(rec, Stage::Failed)?;
                Ok(None)
            }
        }
    }

    fn run_split(&self, rec: &mut JobRecord) -> Result<Vec<Section>> {
        let path = self.path(&rec.job_id, SPLIT);
        if let Some(s) = self.store.read_optional_json(&path)? {
            return Ok(s);
        }
        let c: Classification = self.store.read_json(&self.path(&rec.job_id, CLASSIFY))?;
        let sections = decode_bio(&c.labels);
        self.store.write_json(&path, &sections)?;
        Ok(sections)
    }

    fn run_extract(&self, rec: &mut JobRecord) -> Result<Option<ExtractOutput>> {
        let path = self.path(&rec.job_id, EXTRACT);
        let out = match self.store.read_optional_json::<ExtractOutput>(&path)? {
            Some(o) => o,
            None => {
                let packet = self.packet(&rec.job_id)?;
                let sections: Vec<Section> =
                    self.store.read_json(&self.path(&rec.job_id, SPLIT))?;
                let base_seed = self.seed(&rec.job_id);
                let mut extracted = Vec::new();
                for (k, s) in sections.iter().enumerate() {
                    if s.class_name == OTHER_CLASS {
                        continue;
                    }
                    let schema = self.schema(&s.class_name).ok_or_else(|| {
                        Error::Validation(format!("section {}: unknown class", s.section_id))
                    })?;
                    let ctx = ExtractionContext {
                        backend: self.parts.extractor.as_ref(),
                        prices: &self.parts.prices,
                        retry: &self.settings.retry,
                        sleeper: self.parts.sleeper.as_ref(),
                        modality: self.settings.modality,
                        few_shot: self.settings.few_shot,
                        seed: base_seed.wrapping_add(k as u64 + 1),
                    };
                    extracted.push(extract_section(s, &packet, schema, &ctx));
                }
                let out = ExtractOutput {
                    sections: extracted,
                };
                let attempts = out
                    .sections
                    .iter()
                    .map(|s| s.result.attempts)
                    .max()
                    .unwrap_or(0);
                rec.attempts.insert(EXTRACT.into(), attempts);
                self.store.write_json(&path, &out)?;
                out
            }
        };
        let backend_failure = out
            .sections
            .iter()
            .map(|s| &s.result)
            .find(|r| r.failure_kind == Some(FailureKind::Backend));
        if let Some(r) = backend_failure {
            let reason = format!(
                "section {}: {}",
                r.section_id,
                r.failure_reason.as_deref().unwrap_or("backend failure")
            );
            self.dead_letter(rec, Stage::Extracting, reason, r.attempts)?;
            return Ok(None);
        }
        Ok(Some(out))
    }

    fn run_assess(&self, rec: &mut JobRecord) -> Result<AssessOutput> {
        let path = self.path(&rec.job_id, ASSESS);
        if let Some(a) = self.store.read_optional_json(&path)? {
            return Ok(a);
        }
        let packet = self.packet(&rec.job_id)?;
        let sections: Vec<Section> = self.store.read_json(&self.path(&rec.job_id, SPLIT))?;
        let extract: ExtractOutput = self.store.read_json(&self.path(&rec.job_id, EXTRACT))?;
        let threshold = self.settings.threshold;
        let mut reports = Vec::new();
        let mut triggers = Vec::new();
        for sx in extract.sections.iter().filter(|s| s.result.is_ok()) {
            let r = &sx.result;
            let lines = section_lines(&packet, &sections, &r.section_id);
            let report = assess(r, &lines, threshold)?;
            let decision = route(&report, self.settings.hitl_enabled, threshold);
            triggers.extend(
                decision
                    .trigger_attributes
                    .iter()
                    .map(|a| format!("{}/{a}", r.section_id)),
            );
            reports.push(report);
        }
        let outcome = if self.settings.hitl_enabled && !triggers.is_empty() {
            RoutingOutcome::Review
        } else {
            RoutingOutcome::AutoApprove
        };
        let out = AssessOutput {
            reports,
            routing: RoutingDecision {
                outcome,
                trigger_attributes: triggers,
                threshold_used: threshold,
            },
        };
        self.store.write_json(&path, &out)?;
        Ok(out)
    }

    /// Final per-section results: reviewed if a review happened, else as extracted.
    pub fn final_results(&self, job_id: &str) -> Result<Option<Vec<ExtractionResult>>> {
        if let Some(r) = self
            .store
            .read_optional_json::<ReviewOutput>(&self.path(job_id, REVIEW))?
        {
            return Ok(Some(r.results));
        }
        Ok(self
            .store
            .read_optional_json::<ExtractOutput>(&self.path(job_id, EXTRACT))?
            .map(|o| o.results()))
    }

    fn run_validate(&self, rec: &mut JobRecord) -> Result<Vec<ExtractionResult>> {
        let results = self.final_results(&rec.job_id)?.unwrap_or_default();
        let path = self.path(&rec.job_id, VALIDATE);
        if !path.exists() {
            let sections: Vec<Section> = self.store.read_json(&self.path(&rec.job_id, SPLIT))?;
            let pairs: Vec<(Section, ExtractionResult)> = results
                .iter()
                .filter_map(|r| {
                    sections
                        .iter()
                        .find(|s| s.section_id == r.section_id)
                        .map(|s| (s.clone(), r.clone()))
                })
                .collect();
            let outcomes: Vec<RuleOutcome> = validate_all(&self.parts.rules, &pairs)
                .into_iter()
                .map(|(rule_id, determination)| RuleOutcome {
                    rule_id,
                    determination,
                })
                .collect();
            self.store.write_json(&path, &outcomes)?;
        }
        Ok(results)
    }

    fn dead_letter(
        &self,
        rec: &mut JobRecord,
        stage: Stage,
        error: String,
        attempts: u32,
    ) -> Result<()> {
        let dl = DeadLetterRecord {
            job_id: rec.job_id.clone(),
            stage,
            error,
            attempts,
            timestamp_ms: now_millis(),
            payload_ref: self.path(&rec.job_id, INTAKE).display().to_string(),
        };
        self.store
            .write_json(&self.store.dead_letter_path(&rec.job_id), &dl)?;
        self.finish_dead_letter(rec, dl)
    }

    fn finish_dead_letter(&self, rec: &mut JobRecord, dl: DeadLetterRecord) -> Result<()> {
        log::warn!(
            "job {} dead-lettered at {}: {}",
            rec.job_id,
            dl.stage,
            dl.error
        );
        let key = match dl.stage {
            Stage::Classifying => CLASSIFY,
            _ => EXTRACT,
        };
        rec.attempts.insert(key.into(), dl.attempts);
        rec.errors.push(dl.error);
        self.finish(rec, Stage::DeadLettered)
    }

    /// Publishes the completion event, then persists the terminal record.
    fn finish(&self, rec: &mut JobRecord, status: Stage) -> Result<()> {
        rec.advance(status)?;
        self.store.append_event(&self.completion_event(rec)?)?;
        self.store.save_record(rec)
    }

    pub fn completion_event(&self, rec: &JobRecord) -> Result<CompletionEvent> {
        let assess: Option<AssessOutput> = self
            .store
            .read_optional_json(&self.path(&rec.job_id, ASSESS))?;
        let determinations: Option<Vec<RuleOutcome>> = self
            .store
            .read_optional_json(&self.path(&rec.job_id, VALIDATE))?;
        let confidence = match &assess {
            Some(a) => ConfidenceSummary {
                min_attribute_confidence: a
                    .reports
                    .iter()
                    .map(|r| r.min_attribute_confidence)
                    .fold(1.0, f64::min),
                flagged_attributes: a.routing.trigger_attributes.len(),
            },
            None => ConfidenceSummary::default(),
        };
        let mut summary = DeterminationSummary::default();
        for o in determinations.iter().flatten() {
            match o.determination.status {
                DeterminationStatus::Pass => summary.pass += 1,
                DeterminationStatus::Fail => summary.fail += 1,
                DeterminationStatus::InformationNotFound => summary.information_not_found += 1,
            }
        }
        let result_locations = rec
            .outputs
            .values()
            .map(|f| format!("jobs/{}/{f}", rec.job_id))
            .collect();
        Ok(CompletionEvent {
            job_id: rec.job_id.clone(),
            packet_id: rec.packet_id.clone(),
            status: rec.stage,
            result_locations,
            confidence,
            determinations: summary,
            timings_ms: rec.timings_ms.clone(),
        })
    }

    /// Jobs awaiting review with their flagged attributes, newest first.
    pub fn review_queue(&self) -> Result<Vec<ReviewItem>> {
        let mut items = Vec::new();
        for id in self.store.job_ids()? {
            let Ok(rec) = self.store.load_record(&id) else {
                continue;
            };
            if rec.stage != Stage::AwaitingReview || self.path(&id, REVIEW).exists() {
                continue;
            }
            let assess: AssessOutput = self.store.read_json(&self.path(&id, ASSESS))?;
            let extract: ExtractOutput = self.store.read_json(&self.path(&id, EXTRACT))?;
            let mut flagged = Vec::new();
            for report in &assess.reports {
                let Some(result) = extract
                    .sections
                    .iter()
                    .map(|s| &s.result)
                    .find(|r| r.section_id == report.section_id)
                else {
                    continue;
                };
                for e in report.flagged() {
                    if let Some(a) = result.attribute(&e.name) {
                        flagged.push(FlaggedAttribute {
                            section_id: report.section_id.clone(),
                            class_name: result.class_name.clone(),
                            attribute: e.name.clone(),
                            value: a.value.clone(),
                            confidence: a.confidence,
                            justification: a.justification.clone(),
                            bbox: a.bbox,
                        });
                    }
                }
            }
            items.push(ReviewItem {
                job_id: id,
                packet_id: rec.packet_id,
                updated_at_ms: rec.updated_at_ms,
                flagged,
            });
        }
        items.sort_by(|a, b| {
            b.updated_at_ms
                .cmp(&a.updated_at_ms)
                .then(a.job_id.cmp(&b.job_id))
        });
        Ok(items)
    }

    /// Applies a review decision to a job awaiting review and moves it to
    /// `validating`. Only one decision per job is accepted.
    pub fn submit_review(&self, job_id: &str, decision: &ReviewDecision) -> Result<JobRecord> {
        let lock = self.store.job_lock(job_id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load_record(job_id)?;
        if rec.stage != Stage::AwaitingReview || self.path(job_id, REVIEW).exists() {
            return Err(Error::ReviewConflict(job_id.to_string()));
        }
        let assess: AssessOutput = self.store.read_json(&self.path(job_id, ASSESS))?;
        let extract: ExtractOutput = self.store.read_json(&self.path(job_id, EXTRACT))?;

        let known: BTreeSet<&str> = assess
            .reports
            .iter()
            .map(|r| r.section_id.as_str())
            .collect();
        if let Some(a) = decision
            .actions
            .iter()
            .find(|a| !known.contains(a.section_id.as_str()))
        {
            return Err(Error::Validation(format!(
                "actions: section {:?} has no assessed extraction in job {job_id}",
                a.section_id
            )));
        }
        let covered: BTreeSet<(&str, &str)> = decision
            .actions
            .iter()
            .map(|a| (a.section_id.as_str(), a.attribute.as_str()))
            .collect();
        let missing: Vec<String> = assess
            .reports
            .iter()
            .flat_map(|r| {
                r.flagged()
                    .map(move |e| (r.section_id.as_str(), e.name.as_str()))
            })
            .filter(|k| !covered.contains(k))
            .map(|(s, a)| format!("{s}/{a}"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteDecision(missing));
        }

        let mut results = Vec::new();
        let mut corrections = Vec::new();
        for sx in &extract.sections {
            let report = assess
                .reports
                .iter()
                .find(|r| r.section_id == sx.result.section_id);
            match (report, self.schema(&sx.result.class_name)) {
                (Some(report), Some(schema)) => {
                    let (updated, mut c) = apply_review(&sx.result, report, schema, decision)?;
                    results.push(updated);
                    corrections.append(&mut c);
                }
                _ => results.push(sx.result.clone()),
            }
        }
        let mut decision = decision.clone();
        if decision.timestamp.is_empty() {
            decision.timestamp = now_millis().to_string();
        }
        let out = ReviewOutput {
            decision,
            results,
            corrections,
        };
        self.store.write_json(&self.path(job_id, REVIEW), &out)?;
        self.finish_review(&mut rec, &out)?;
        Ok(rec)
    }

    fn finish_review(&self, rec: &mut JobRecord, out: &ReviewOutput) -> Result<()> {
        self.store.append_correction(&CorrectionRecord {
            job_id: rec.job_id.clone(),
            reviewer: out.decision.reviewer.clone(),
            role: out.decision.role,
            timestamp: out.decision.timestamp.clone(),
            corrections: out.corrections.clone(),
        })?;
        rec.outputs.insert(REVIEW.into(), stage_file(REVIEW));
        rec.advance(Stage::Validating)?;
        self.store.save_record(rec)
    }

    pub fn sections(&self, job_id: &str) -> Result<Option<Vec<Section>>> {
        self.store.load_record(job_id)?;
        self.store.read_optional_json(&self.path(job_id, SPLIT))
    }

    pub fn determinations(&self, job_id: &str) -> Result<Option<Vec<RuleOutcome>>> {
        self.store.load_record(job_id)?;
        self.store.read_optional_json(&self.path(job_id, VALIDATE))
    }

    pub fn assessment(&self, job_id: &str) -> Result<Option<AssessOutput>> {
        self.store.read_optional_json(&self.path(job_id, ASSESS))
    }

    pub fn dead_letter_record(&self, job_id: &str) -> Result<Option<DeadLetterRecord>> {
        self.store
            .read_optional_json(&self.store.dead_letter_path(job_id))
    }

    pub fn intermediates(&self, job_id: &str) -> Result<Intermediates> {
        let rec = self.store.load_record(job_id)?;
        let ocr = self
            .store
            .read_optional_json::<DocumentPacket>(&self.path(job_id, INTAKE))?
            .map(|p| p.pages.into_iter().map(|pg| pg.lines).collect())
            .unwrap_or_default();
        let extract: Option<ExtractOutput> =
            self.store.read_optional_json(&self.path(job_id, EXTRACT))?;
        Ok(Intermediates {
            job_id: job_id.to_string(),
            stage: rec.stage,
            ocr,
            classification: self
                .store
                .read_optional_json(&self.path(job_id, CLASSIFY))?,
            sections: self.store.read_optional_json(&self.path(job_id, SPLIT))?,
            raw_outputs: extract.as_ref().map(|o| {
                o.sections
                    .iter()
                    .map(|s| (s.result.section_id.clone(), s.raw_responses.clone()))
                    .collect()
            }),
            extraction: self.final_results(job_id)?,
            assessment: self.assessment(job_id)?,
            determinations: self
                .store
                .read_optional_json(&self.path(job_id, VALIDATE))?,
            dead_letter: self.dead_letter_record(job_id)?,
            errors: rec.errors,
        })
    }
}

pub fn stage_file(name: &str) -> String {
    format!("stage_{name}.out")
}

fn section_lines(packet: &DocumentPacket, sections: &[Section], section_id: &str) -> Vec<TextLine> {
    sections
        .iter()
        .find(|s| s.section_id == section_id)
        .map(|s| {
            s.page_indices
                .iter()
                .filter_map(|p| packet.pages.get(*p))
                .flat_map(|p| p.lines.iter().cloned())
                .collect()
        })
        .unwrap_or_default()
}

fn config_hash(parts: &Components, settings: &EngineSettings) -> String {
    let rules: Vec<serde_json::Value> = parts
        .rules
        .iter()
        .map(|r| {
            serde_json::json!({
                "rule_id": r.rule_id,
                "facts": r.facts,
                "condition": r.condition,
                "recommendations": r.recommendations,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "classes": parts.classes,
        "rules": rules,
        "classifier": parts.classifier.name(),
        "extractor": parts.extractor.name(),
        "hitl_enabled": settings.hitl_enabled,
        "threshold": settings.threshold,
        "modality": settings.modality,
        "few_shot": settings.few_shot,
        "max_attempts": settings.retry.max_attempts,
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::LoadedConfig;
use super::manifest::{load_manifest, parse_manifest, ManifestFormat};
use crate::assessment::RoutingDecision;
use crate::error::{read_to_string, Error, Result};
use crate::evaluation::{
    aggregate, aggregate_splits, evaluate_packet, ordered_sum, split_metrics, EvaluationReport,
    SplitReport, SplitSection,
};
use crate::extraction::{
    AlwaysProseExtractor, ExtractionResult, ExtractorBackend, FailingExtractor, MockExtractor,
    Modality,
};
use crate::model::{
    load_ground_truth, load_packet, parse_class_config, ClassSchema, DocumentPacket, GroundTruth,
};
use crate::orchestrator::{Components, Engine, JobStore, RuleOutcome, Sleeper, Stage, WorkerPool};
use crate::segmentation::{ClassifierBackend, Section};

/// Offline extractor backends selectable by name.
pub const BUILTIN_BACKENDS: [&str; 3] = ["mock", "always_prose", "failing"];

pub fn builtin_extractor(name: &str) -> Option<Arc<dyn ExtractorBackend>> {
    match name {
        "mock" => Some(Arc::new(MockExtractor)),
        "always_prose" => Some(Arc::new(AlwaysProseExtractor)),
        "failing" => Some(Arc::new(FailingExtractor)),
        _ => None,
    }
}

/// Everything the batch run reports about one packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketResult {
    pub packet_id: String,
    pub job_id: String,
    pub status: Stage,
    pub page_count: usize,
    pub sections: Vec<Section>,
    pub results: Vec<ExtractionResult>,
    pub determinations: Vec<RuleOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingDecision>,
    pub errors: Vec<String>,
    /// Summed stage wall-clock time.
    pub latency_ms: f64,
}

impl PacketResult {
    /// Dead-lettered and failed jobs both count as failed documents.
    pub fn is_failed(&self) -> bool {
        matches!(self.status, Stage::Failed | Stage::DeadLettered)
    }

    pub fn cost(&self) -> f64 {
        ordered_sum(self.results.iter().map(|r| r.cost))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modalities {
    pub ocr: bool,
    pub image: bool,
}

impl From<Modality> for Modalities {
    fn from(m: Modality) -> Self {
        Modalities {
            ocr: m.uses_text(),
            image: m.uses_images(),
        }
    }
}

impl std::fmt::Display for Modalities {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match (self.ocr, self.image) {
            (true, true) => "OCR+Image",
            (true, false) => "OCR",
            (false, true) => "Image",
            (false, false) => "-",
        };
        f.pad(s)
    }
}

/// One configuration's row in the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub backend: String,
    pub modalities: Modalities,
    /// `None` when no packet had a ground truth.
    pub extraction_score: Option<f64>,
    pub mean_latency_ms: f64,
    pub total_cost: f64,
    pub failed: usize,
    pub documents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_ref: Option<String>,
    pub rows: Vec<ReportRow>,
    /// Job count per final stage.
    pub jobs: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReport>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.rows.iter().map(|r| r.failed).sum()
    }

    /// The report as an aligned text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<14} {:<10} {:>16} {:>12} {:>10} {:>7}\n",
            "Backend", "Modalities", "Extraction Score", "Latency (s)", "Cost ($)", "Failed"
        );
        for r in &self.rows {
            let score = r
                .extraction_score
                .map_or_else(|| "n/a".to_string(), |s| format!("{s:.4}"));
            let _ = writeln!(
                out,
                "{:<14} {:<10} {:>16} {:>12.3} {:>10.4} {:>7}",
                r.backend,
                r.modalities,
                score,
                r.mean_latency_ms / 1000.0,
                r.total_cost,
                r.failed
            );
        }
        if let Some(s) = &self.split {
            out.push_str(&split_lines(s));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn split_lines(s: &SplitReport) -> String {
    format!(
        "\nPage accuracy       {:.4}\nSplit (ordered)     {:.4}\nSplit (unordered)   {:.4}\n",
        s.page_accuracy, s.ordered_accuracy, s.unordered_accuracy
    )
}

/// Zeroes wall-clock fields (`*latency_ms`, `timings_ms`) anywhere in `value`,
/// so reports from identical runs compare equal.
pub fn mask_latency(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if k.ends_with("latency_ms") {
                    *v = serde_json::json!(0.0);
                } else if k == "timings_ms" {
                    *v = serde_json::json!({});
                } else {
                    mask_latency(v);
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(mask_latency),
        _ => {}
    }
}

pub struct ProcessOptions {
    pub extractor: Arc<dyn ExtractorBackend>,
    pub classifier: Arc<dyn ClassifierBackend>,
    pub sleeper: Arc<dyn Sleeper>,
    /// Overrides the configured modality.
    pub modality: Option<Modality>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub results: Vec<PacketResult>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    /// 0 when every job completed or awaits review, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.failed() > 0 {
            1
        } else {
            0
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_text(path, &text)
}

fn config_name_matches(config_ref: &str, config_path: &Path) -> bool {
    let name = config_path.file_name().and_then(|n| n.to_str());
    let stem = config_path.file_stem().and_then(|n| n.to_str());
    Some(config_ref) == name || Some(config_ref) == stem || Path::new(config_ref) == config_path
}

/// Runs every manifest row through the engine and writes results and reports under `out`:
///
/// - `store/` job store (events in `store/events.jsonl`)
/// - `results/packets/<packet_id>.json` and `results/classes.json`
/// - `run_report.json`, `run_report.txt`, `store/reports/latest.json`
///
/// Manifest and input errors are returned before any job is submitted.
pub fn process(
    manifest_path: &Path,
    config: &LoadedConfig,
    opts: ProcessOptions,
    out: &Path,
) -> Result<RunOutcome> {
    let manifest = load_manifest(manifest_path)?;
    if let Some(cref) = &manifest.config_ref {
        if !config_name_matches(cref, &config.path) {
            return Err(Error::Validation(format!(
                "manifest config_ref {cref:?} does not name the configuration {}",
                config.path.display()
            )));
        }
    }

    let mut problems = Vec::new();
    let mut inputs: Vec<(DocumentPacket, Option<GroundTruth>)> = Vec::new();
    let mut seen = BTreeMap::new();
    for row in &manifest.rows {
        let packet = match load_packet(&row.document_path) {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("manifest row {}: {e}", row.row));
                continue;
            }
        };
        if let Some(first) = seen.insert(packet.packet_id.clone(), row.row) {
            problems.push(format!(
                "manifest row {}: packet_id {:?} already used in row {first}",
                row.row, packet.packet_id
            ));
            continue;
        }
        let gt = match &row.ground_truth_path {
            Some(p) => match load_ground_truth(p, Some(&config.classes)) {
                Ok(gt) if gt.packet_id != packet.packet_id => {
                    problems.push(format!(
                        "manifest row {}: ground truth is for packet {:?}, document is {:?}",
                        row.row, gt.packet_id, packet.packet_id
                    ));
                    continue;
                }
                Ok(gt) => Some(gt),
                Err(e) => {
                    problems.push(format!("manifest row {}: {e}", row.row));
                    continue;
                }
            },
            None => None,
        };
        inputs.push((packet, gt));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems.join("; ")));
    }

    let mut settings = config.config.settings();
    if let Some(m) = opts.modality {
        settings.modality = m;
    }
    let modality = settings.modality;
    let store = JobStore::open(out.join("store"))?;
    let engine = Arc::new(Engine::new(
        store,
        Components {
            classes: config.classes.clone(),
            rules: config.rules.clone(),
            prices: config.prices.clone(),
            classifier: opts.classifier,
            extractor: opts.extractor,
            sleeper: opts.sleeper,
        },
        settings,
    )?);

    let pool = WorkerPool::start(engine.clone());
    pool.resume_pending()?;
    let mut job_ids = Vec::with_capacity(inputs.len());
    for (packet, _) in &inputs {
        let id = engine.submit_packet(packet)?;
        pool.enqueue(&id)?;
        job_ids.push(id);
    }
    pool.wait_idle();
    let errors = pool.errors();
    pool.shutdown();
    if let Some((job, e)) = errors.first() {
        return Err(Error::Validation(format!(
            "job {job} could not be persisted: {e}"
        )));
    }

    let mut results = Vec::with_capacity(inputs.len());
    for ((packet, _), job_id) in inputs.iter().zip(&job_ids) {
        results.push(collect(&engine, job_id, packet)?);
    }

    let results_dir = out.join("results");
    for r in &results {
        write_pretty(
            &results_dir
                .join("packets")
                .join(format!("{}.json", r.packet_id)),
            r,
        )?;
    }
    write_pretty(
        &results_dir.join("classes.json"),
        &serde_json::json!({ "classes": &config.classes }),
    )?;

    let pairs: Vec<(&PacketResult, Option<&GroundTruth>)> = results
        .iter()
        .zip(inputs.iter().map(|(_, gt)| gt.as_ref()))
        .collect();
    let scored = score(&pairs, &config.classes)?;
    let mut jobs = BTreeMap::new();
    for r in &results {
        *jobs.entry(r.status.as_str().to_string()).or_insert(0) += 1;
    }
    let latencies: Vec<f64> = results.iter().map(|r| r.latency_ms).collect();
    let report = RunReport {
        config_hash: engine.config_hash().to_string(),
        config_ref: manifest.config_ref.clone(),
        rows: vec![ReportRow {
            backend: engine.extractor_name().to_string(),
            modalities: modality.into(),
            extraction_score: scored.evaluation.as_ref().map(|e| e.extraction_score),
            mean_latency_ms: if latencies.is_empty() {
                0.0
            } else {
                ordered_sum(latencies.iter().copied()) / latencies.len() as f64
            },
            total_cost: ordered_sum(results.iter().map(PacketResult::cost)),
            failed: results.iter().filter(|r| r.is_failed()).count(),
            documents: results.len(),
        }],
        jobs,
        evaluation: scored.evaluation,
        split: scored.split,
        warnings: scored.warnings,
    };
    write_pretty(&out.join("run_report.json"), &report)?;
    write_text(&out.join("run_report.txt"), &report.to_table())?;
    engine.store().write_json(
        &engine.store().root().join("reports").join("latest.json"),
        &report,
    )?;
    log::info!(
        "processed {} packets: {}",
        results.len(),
        report
            .jobs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(RunOutcome {
        report,
        results,
        out_dir: out.to_path_buf(),
    })
}

fn collect(engine: &Engine, job_id: &str, packet: &DocumentPacket) -> Result<PacketResult> {
    let rec = engine.record(job_id)?;
    Ok(PacketResult {
        packet_id: rec.packet_id.clone(),
        job_id: job_id.to_string(),
        status: rec.stage,
        page_count: packet.page_count(),
        sections: engine.sections(job_id)?.unwrap_or_default(),
        results: engine.final_results(job_id)?.unwrap_or_default(),
        determinations: engine.determinations(job_id)?.unwrap_or_default(),
        routing: engine.assessment(job_id)?.map(|a| a.routing),
        errors: rec.errors.clone(),
        latency_ms: ordered_sum(rec.timings_ms.values().copied()),
    })
}

struct Scored {
    evaluation: Option<EvaluationReport>,
    split: Option<SplitReport>,
    warnings: Vec<String>,
}

/// Extraction counts over non-failed packets with a ground truth, and split
/// metrics over packets whose ground truth labels every page.
fn score(
    pairs: &[(&PacketResult, Option<&GroundTruth>)],
    classes: &[ClassSchema],
) -> Result<Scored> {
    let mut warnings = Vec::new();
    let mut documents = Vec::new();
    let mut failed = 0;
    let mut splits = Vec::new();
    let mut any_gt = false;
    for (r, gt) in pairs {
        let Some(gt) = gt else { continue };
        any_gt = true;
        if r.is_failed() {
            failed += 1;
        } else {
            documents.push(evaluate_packet(gt, &r.sections, &r.results, classes)?);
        }
        if r.sections.is_empty() {
            warnings.push(format!(
                "packet {}: no sections to score the split",
                r.packet_id
            ));
            continue;
        }
        let gt_split: Vec<SplitSection> = gt.sections.iter().map(SplitSection::from).collect();
        let pred: Vec<SplitSection> = r.sections.iter().map(SplitSection::from).collect();
        match split_metrics(&r.packet_id, &gt_split, &pred, r.page_count) {
            Ok(s) => splits.push(s),
            Err(e) => warnings.push(format!("packet {}: split not scored: {e}", r.packet_id)),
        }
    }
    Ok(Scored {
        evaluation: any_gt.then(|| aggregate(&documents, failed)),
        split: (!splits.is_empty()).then(|| aggregate_splits(splits)),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOutcome {
    pub evaluation: EvaluationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReport>,
    pub warnings: Vec<String>,
}

impl EvaluateOutcome {
    pub fn to_table(&self) -> String {
        let e = &self.evaluation;
        let mut out = format!(
            "{:<28} {:>9} {:>9} {:>9}\n",
            "Field", "Precision", "Recall", "F1"
        );
        for (name, f) in &e.fields {
            let _ = writeln!(
                out,
                "{:<28} {:>9.4} {:>9.4} {:>9.4}",
                name, f.metrics.precision, f.metrics.recall, f.metrics.f1
            );
        }
        let _ = writeln!(
            out,
            "{:<28} {:>9.4} {:>9.4} {:>9.4}",
            "micro", e.micro.precision, e.micro.recall, e.micro.f1
        );
        let _ = writeln!(
            out,
            "{:<28} {:>9.4} {:>9.4} {:>9.4}",
            "macro", e.macro_avg.precision, e.macro_avg.recall, e.macro_avg.f1
        );
        let _ = writeln!(
            out,
            "\nExtraction Score    {:.4}\nDocuments           {}\nFailed              {}",
            e.extraction_score, e.documents, e.failed
        );
        if let Some(s) = &self.split {
            out.push_str(&split_lines(s));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn packet_results_dir(results: &Path) -> PathBuf {
    for candidate in [
        results.join("results").join("packets"),
        results.join("packets"),
    ] {
        if candidate.is_dir() {
            return candidate;
        }
    }
    results.to_path_buf()
}

fn classes_file(results: &Path, packets_dir: &Path) -> Option<PathBuf> {
    [
        packets_dir.parent().map(|p| p.join("classes.json")),
        Some(results.join("results").join("classes.json")),
        Some(results.join("classes.json")),
    ]
    .into_iter()
    .flatten()
    .find(|p| p.is_file())
}

/// Scores stored packet results against a baselines manifest and writes
/// `evaluation.json` and `evaluation.txt` under `out`.
///
/// `results` may be a run directory, its `results/` directory or a directory
/// of packet result files. Class schemas come from `classes`, else from the
/// `classes.json` the run wrote. Packets without a baseline are skipped with a
/// warning.
pub fn evaluate(
    results: &Path,
    baselines: &Path,
    classes: Option<&[ClassSchema]>,
    out: &Path,
) -> Result<EvaluateOutcome> {
    let packets_dir = packet_results_dir(results);
    let loaded_classes;
    let classes = match classes {
        Some(c) => c,
        None => {
            let path = classes_file(results, &packets_dir).ok_or_else(|| {
                Error::Validation(format!(
                    "no classes.json found for results in {}",
                    results.display()
                ))
            })?;
            loaded_classes = parse_class_config(&read_to_string(&path)?)?;
            &loaded_classes
        }
    };

    let format = match baselines.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => ManifestFormat::Json,
        _ => ManifestFormat::Csv,
    };
    let manifest = parse_manifest(
        &read_to_string(baselines)?,
        format,
        baselines.parent().unwrap_or(Path::new(".")),
    )?;
    let mut warnings = Vec::new();
    let mut gts: BTreeMap<String, GroundTruth> = BTreeMap::new();
    for row in &manifest.rows {
        let Some(p) = &row.ground_truth_path else {
            continue;
        };
        match load_ground_truth(p, Some(classes)) {
            Ok(gt) => {
                gts.insert(gt.packet_id.clone(), gt);
            }
            Err(e) => warnings.push(format!("baselines row {}: {e}", row.row)),
        }
    }

    let mut files: Vec<PathBuf> = fs::read_dir(&packets_dir)
        .map_err(|e| Error::io(&packets_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name() != Some("classes.json".as_ref())
        })
        .collect();
    files.sort();
    let mut packet_results = Vec::new();
    for f in files {
        let r: PacketResult = serde_json::from_str(&read_to_string(&f)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", f.display())))?;
        packet_results.push(r);
    }

    let mut pairs = Vec::new();
    let mut matched = BTreeSet::new();
    for r in &packet_results {
        match gts.get(&r.packet_id) {
            Some(gt) => {
                matched.insert(r.packet_id.as_str());
                pairs.push((r, Some(gt)));
            }
            None => warnings.push(format!("packet {}: missing baseline, skipped", r.packet_id)),
        }
    }
    for id in gts.keys().filter(|id| !matched.contains(id.as_str())) {
        warnings.push(format!("baseline {id}: no result"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let scored = score(&pairs, classes)?;
    warnings.extend(scored.warnings);
    let outcome = EvaluateOutcome {
        evaluation: scored.evaluation.unwrap_or_else(|| aggregate(&[], 0)),
        split: scored.split,
        warnings,
    };
    write_pretty(&out.join("evaluation.json"), &outcome)?;
    write_text(&out.join("evaluation.txt"), &outcome.to_table())?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::{generate_corpus, write_corpus, CorpusSpec};
    use crate::orchestrator::RecordingSleeper;
    use crate::segmentation::KeywordClassifier;

    const CLASSES: &str = r#"{"classes":[
      {"class_name":"invoice","keywords":["invoice"],"attributes":[
        {"name":"total","value_kind":"number",
         "mock_pattern":"Total:\\s*([0-9.]+);low=Approx total:\\s*([0-9.]+)",
         "mock_template":"Total: {value};low=Approx total: {value}"}]},
      {"class_name":"w2","keywords":["w-2"],"attributes":[
        {"name":"wages","value_kind":"number","mock_pattern":"Wages:\\s*([0-9.]+)","mock_template":"Wages: {value}"}]}]}"#;

    fn setup(dir: &Path, count: usize, low: f64) -> LoadedConfig {
        fs::write(dir.join("classes.json"), CLASSES).unwrap();
        fs::write(
            dir.join("prices.json"),
            r#"{"mock":{"price_in":0.003,"price_out":0.015}}"#,
        )
        .unwrap();
        fs::write(
            dir.join("engine.json"),
            r#"{"classes":"classes.json","prices":"prices.json","retry":{"max_attempts":3,"base_delay_secs":0.001,"factor":2.0,"jitter":0.1}}"#,
        )
        .unwrap();
        let config =
            LoadedConfig::load_with(dir.join("engine.json"), Vec::<(String, String)>::new())
                .unwrap();
        let spec = CorpusSpec {
            count,
            low_confidence_rate: low,
            ..CorpusSpec::default()
        };
        let corpus = generate_corpus(&config.classes, &spec).unwrap();
        write_corpus(&dir.join("corpus"), &spec, &corpus).unwrap();
        config
    }

    fn opts(backend: &str) -> ProcessOptions {
        ProcessOptions {
            extractor: builtin_extractor(backend).unwrap(),
            classifier: Arc::new(KeywordClassifier),
            sleeper: Arc::new(RecordingSleeper::default()),
            modality: None,
        }
    }

    #[test]
    fn mock_run_is_perfect_and_evaluate_agrees() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path(), 4, 0.0);
        let out = dir.path().join("run");
        let run = process(
            &dir.path().join("corpus/manifest.csv"),
            &config,
            opts("mock"),
            &out,
        )
        .unwrap();
        assert_eq!(run.exit_code(), 0);
        let row = &run.report.rows[0];
        assert_eq!(row.extraction_score, Some(1.0));
        assert_eq!(row.failed, 0);
        assert!(row.total_cost > 0.0);
        let split = run.report.split.as_ref().unwrap();
        assert_eq!((split.page_accuracy, split.ordered_accuracy), (1.0, 1.0));
        assert!(out.join("store/reports/latest.json").is_file());
        assert!(run.report.to_table().contains("Extraction Score"));

        let ev = evaluate(
            &out,
            &dir.path().join("corpus/manifest.csv"),
            None,
            &dir.path().join("ev"),
        )
        .unwrap();
        assert_eq!(ev.evaluation, run.report.evaluation.clone().unwrap());
        assert!(ev.warnings.is_empty(), "{:?}", ev.warnings);
    }

    #[test]
    fn prose_backend_fails_every_packet() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path(), 3, 0.0);
        let run = process(
            &dir.path().join("corpus/manifest.csv"),
            &config,
            opts("always_prose"),
            &dir.path().join("run"),
        )
        .unwrap();
        assert_eq!(run.report.rows[0].failed, 3);
        assert_eq!(run.exit_code(), 1);
    }

    #[test]
    fn missing_baseline_is_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path(), 3, 0.0);
        let out = dir.path().join("run");
        process(
            &dir.path().join("corpus/manifest.csv"),
            &config,
            opts("mock"),
            &out,
        )
        .unwrap();
        let manifest = fs::read_to_string(dir.path().join("corpus/manifest.csv")).unwrap();
        let partial: Vec<&str> = manifest.lines().take(3).collect();
        fs::write(dir.path().join("corpus/partial.csv"), partial.join("\n")).unwrap();
        let ev = evaluate(
            &out,
            &dir.path().join("corpus/partial.csv"),
            None,
            &dir.path().join("ev"),
        )
        .unwrap();
        assert_eq!(ev.warnings.len(), 1, "{:?}", ev.warnings);
        assert!(ev.warnings[0].contains("packet-002"));
        assert_eq!(ev.evaluation.documents, 2);
    }

    #[test]
    fn bad_rows_are_reported_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let config = setup(dir.path(), 1, 0.0);
        let m = dir.path().join("corpus/bad.csv");
        fs::write(
            &m,
            "document_path\npackets/packet-000.json\npackets/packet-000.json\n",
        )
        .unwrap();
        let e = process(&m, &config, opts("mock"), &dir.path().join("run"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("row 3") && e.contains("already used"), "{e}");
        assert!(!dir.path().join("run/store").exists());
        fs::write(
            &m,
            "document_path,config_ref\npackets/packet-000.json,other.json\n",
        )
        .unwrap();
        assert!(process(&m, &config, opts("mock"), &dir.path().join("run")).is_err());
        fs::write(
            &m,
            "document_path,config_ref\npackets/packet-000.json,engine\n",
        )
        .unwrap();
        assert!(process(&m, &config, opts("mock"), &dir.path().join("run")).is_ok());
    }

    #[test]
    fn masking_zeroes_wall_clock_fields() {
        let mut v = serde_json::json!({"latency_ms": 3.5, "a": [{"mean_latency_ms": 1.0, "timings_ms": {"x": 1.0}, "cost": 2.0}]});
        mask_latency(&mut v);
        assert_eq!(
            v,
            serde_json::json!({"latency_ms": 0.0, "a": [{"mean_latency_ms": 0.0, "timings_ms": {}, "cost": 2.0}]})
        );
    }
}

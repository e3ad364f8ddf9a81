#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use idp_core::assessment::{AttributeDecision, ReviewAction, ReviewDecision, Role};
use idp_core::batch::{generate_corpus, CorpusSpec, GeneratedPacket};
use idp_core::extraction::{BackendResponse, ExtractorBackend, MockExtractor, ModelRequest};
use idp_core::model::load_class_config;
use idp_core::orchestrator::{
    Components, Engine, EngineSettings, JobStore, RecordingSleeper, Sleeper,
};
use idp_core::segmentation::{BioLabel, ClassifierBackend, ClassifyRequest, KeywordClassifier};
use idp_core::{ClassSchema, Result};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn classes() -> Vec<ClassSchema> {
    load_class_config(data_dir().join("classes.json")).unwrap()
}

pub fn corpus(count: usize, low_confidence_rate: f64) -> Vec<GeneratedPacket> {
    generate_corpus(
        &classes(),
        &CorpusSpec {
            count,
            low_confidence_rate,
            ..CorpusSpec::default()
        },
    )
    .unwrap()
}

/// Counts backend invocations per key; survives engine restarts.
#[derive(Default, Clone)]
pub struct Effects(Arc<Mutex<BTreeMap<String, usize>>>);

impl Effects {
    pub fn hit(&self, key: String) {
        *self.0.lock().unwrap().entry(key).or_default() += 1;
    }

    pub fn snapshot(&self) -> BTreeMap<String, usize> {
        self.0.lock().unwrap().clone()
    }
}

pub struct CountingClassifier(pub Effects);

impl ClassifierBackend for CountingClassifier {
    fn name(&self) -> &str {
        "keyword"
    }

    fn classify(&self, req: &ClassifyRequest<'_>) -> Result<BioLabel> {
        self.0
            .hit(format!("{}/page-{}", req.packet_id, req.page_index));
        KeywordClassifier.classify(req)
    }
}

/// Mock extraction with an effect counter, an optional delay and a
/// concurrency probe.
#[derive(Default, Clone)]
pub struct CountingExtractor {
    pub effects: Effects,
    pub delay: Duration,
    pub probe: Arc<Mutex<(usize, usize)>>,
    pub order: Arc<Mutex<Vec<String>>>,
}

impl CountingExtractor {
    pub fn peak(&self) -> usize {
        self.probe.lock().unwrap().1
    }
}

impl ExtractorBackend for CountingExtractor {
    fn name(&self) -> &str {
        "mock"
    }

    fn extract(&self, request: &ModelRequest, schema: &ClassSchema) -> Result<BackendResponse> {
        {
            let mut p = self.probe.lock().unwrap();
            p.0 += 1;
            p.1 = p.1.max(p.0);
        }
        self.effects
            .hit(format!("{}/{}", request.packet_id, request.section_id));
        self.order.lock().unwrap().push(request.packet_id.clone());
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let out = MockExtractor.extract(request, schema);
        self.probe.lock().unwrap().0 -= 1;
        out
    }
}

pub fn engine_with(
    store: JobStore,
    settings: EngineSettings,
    classifier: Arc<dyn ClassifierBackend>,
    extractor: Arc<dyn ExtractorBackend>,
    sleeper: Arc<dyn Sleeper>,
) -> Engine {
    Engine::new(
        store,
        Components {
            classes: classes(),
            rules: idp_core::rules::load_rules(data_dir().join("rules.json"), None).unwrap(),
            prices: Default::default(),
            classifier,
            extractor,
            sleeper,
        },
        settings,
    )
    .unwrap()
}

pub fn mock_engine(store: JobStore, settings: EngineSettings) -> Engine {
    engine_with(
        store,
        settings,
        Arc::new(KeywordClassifier),
        Arc::new(MockExtractor),
        Arc::new(RecordingSleeper::default()),
    )
}

/// Accepts every flagged attribute of `job_id`, if it is in the review queue.
pub fn accept_all(
    engine: &Engine,
    job_id: &str,
) -> Result<Option<idp_core::orchestrator::JobRecord>> {
    let Some(item) = engine
        .review_queue()?
        .into_iter()
        .find(|i| i.job_id == job_id)
    else {
        return Ok(None);
    };
    let decision = ReviewDecision {
        reviewer: "qa".into(),
        role: Role::Reviewer,
        actions: item
            .flagged
            .iter()
            .map(|f| AttributeDecision {
                section_id: f.section_id.clone(),
                attribute: f.attribute.clone(),
                action: ReviewAction::Accept,
            })
            .collect(),
        timestamp: "2026-01-01T00:00:00Z".into(),
    };
    engine.submit_review(job_id, &decision).map(Some)
}

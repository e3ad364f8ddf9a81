mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::*;
use idp_core::batch::mask_latency;
use idp_core::orchestrator::{EngineSettings, JobStore, RecordingSleeper, Stage};
use idp_core::{DocumentPacket, Error, Result};

struct Outcome {
    stages: BTreeMap<String, Stage>,
    results: BTreeMap<String, serde_json::Value>,
    events: usize,
}

fn engine(store: JobStore, effects: &Effects) -> idp_core::orchestrator::Engine {
    engine_with(
        store,
        EngineSettings::default(),
        Arc::new(CountingClassifier(effects.clone())),
        Arc::new(CountingExtractor {
            effects: effects.clone(),
            ..Default::default()
        }),
        Arc::new(RecordingSleeper::default()),
    )
}

/// Submits, runs and reviews every packet in order.
fn drive(engine: &idp_core::orchestrator::Engine, packets: &[DocumentPacket]) -> Result<()> {
    for p in packets {
        let id = engine.submit_packet(p)?;
        let rec = engine.run(&id)?;
        if rec.stage == Stage::AwaitingReview {
            accept_all(engine, &id)?;
            engine.run(&id)?;
        }
    }
    Ok(())
}

fn finish(engine: &idp_core::orchestrator::Engine, packets: &[DocumentPacket]) -> Outcome {
    for p in packets {
        engine.submit_packet(p).unwrap();
    }
    engine.resume_pending().unwrap();
    drive(engine, packets).unwrap();
    let mut stages = BTreeMap::new();
    let mut results = BTreeMap::new();
    for p in packets {
        let id = engine.job_id_for(&p.packet_id);
        stages.insert(p.packet_id.clone(), engine.record(&id).unwrap().stage);
        let mut v = serde_json::to_value(engine.final_results(&id).unwrap()).unwrap();
        mask_latency(&mut v);
        results.insert(p.packet_id.clone(), v);
    }
    Outcome {
        stages,
        results,
        events: engine.store().read_events().unwrap().len(),
    }
}

#[test]
fn every_kill_point_recovers_with_each_backend_effect_once() {
    let packets: Vec<DocumentPacket> = corpus(4, 0.5).into_iter().map(|g| g.packet).collect();

    let dir = tempfile::tempdir().unwrap();
    let effects = Effects::default();
    let clean = engine(JobStore::open(dir.path()).unwrap(), &effects);
    drive(&clean, &packets).unwrap();
    let total = clean.store().commits();
    let baseline = finish(&clean, &packets);
    let expected_effects = effects.snapshot();
    assert!(total >= 20, "only {total} commits");
    eprintln!("{total} kill points");
    assert!(baseline.stages.values().all(|s| *s == Stage::Complete));
    assert!(expected_effects.values().all(|&n| n == 1));
    assert_eq!(baseline.events, packets.len());

    for k in 1..=total {
        let dir = tempfile::tempdir().unwrap();
        let effects = Effects::default();
        let first = engine(
            JobStore::open(dir.path()).unwrap().with_kill_point(k),
            &effects,
        );
        match drive(&first, &packets) {
            Err(Error::Interrupted(n)) => assert_eq!(n, k),
            other => panic!("kill point {k}: expected an interruption, got {other:?}"),
        }
        drop(first);

        let second = engine(JobStore::open(dir.path()).unwrap(), &effects);
        let got = finish(&second, &packets);
        assert_eq!(got.stages, baseline.stages, "kill point {k}");
        assert_eq!(got.results, baseline.results, "kill point {k}");
        assert_eq!(got.events, packets.len(), "kill point {k}");
        assert_eq!(effects.snapshot(), expected_effects, "kill point {k}");
    }
}

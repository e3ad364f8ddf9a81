use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use idp_core::assessment::Role;
use idp_core::batch::{generate_corpus, CorpusSpec, GeneratedPacket};
use idp_core::extraction::MockExtractor;
use idp_core::model::load_class_config;
use idp_core::orchestrator::{Components, Engine, EngineSettings, JobStore, RecordingSleeper};
use idp_core::segmentation::KeywordClassifier;
use idp_service::{router, AppState, TokenEntry, Tokens};

const ADMIN: &str = "admin-token";
const REVIEWER: &str = "reviewer-token";

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn tokens() -> Tokens {
    let mut m = BTreeMap::new();
    m.insert(
        ADMIN.into(),
        TokenEntry {
            role: Role::Admin,
            name: "ops".into(),
        },
    );
    m.insert(
        REVIEWER.into(),
        TokenEntry {
            role: Role::Reviewer,
            name: "rita".into(),
        },
    );
    Tokens(m)
}

struct Fixture {
    _dir: tempfile::TempDir,
    store: PathBuf,
    state: AppState,
    app: Router,
    corpus: Vec<GeneratedPacket>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let classes = load_class_config(data_dir().join("classes.json")).unwrap();
    let corpus = generate_corpus(
        &classes,
        &CorpusSpec {
            count: 6,
            low_confidence_rate: 0.3,
            ..CorpusSpec::default()
        },
    )
    .unwrap();
    let store = dir.path().join("store");
    let engine = Engine::new(
        JobStore::open(&store).unwrap(),
        Components {
            classes,
            rules: Vec::new(),
            prices: Default::default(),
            classifier: Arc::new(KeywordClassifier),
            extractor: Arc::new(MockExtractor),
            sleeper: Arc::new(RecordingSleeper::default()),
        },
        EngineSettings::default(),
    )
    .unwrap();
    let state = AppState::start(Arc::new(engine), tokens()).unwrap();
    Fixture {
        _dir: dir,
        store,
        app: router(state.clone()),
        state,
        corpus,
    }
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

async fn submit_all(f: &Fixture) -> Vec<String> {
    let mut ids = Vec::new();
    for g in &f.corpus {
        let (status, body) = call(
            &f.app,
            Method::POST,
            "/jobs",
            Some(ADMIN),
            Some(json!(g.packet)),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        ids.push(body["job_id"].as_str().unwrap().to_string());
    }
    let pool = f.state.pool.clone();
    tokio::task::spawn_blocking(move || pool.wait_idle())
        .await
        .unwrap();
    ids
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.clone(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[tokio::test(flavor = "multi_thread")]
async fn authentication_and_roles() {
    let f = fixture();
    let (s, _) = call(&f.app, Method::GET, "/review/queue", None, None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = call(&f.app, Method::GET, "/review/queue", Some("nope"), None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = call(&f.app, Method::GET, "/review/queue", Some(REVIEWER), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(
        &f.app,
        Method::POST,
        "/jobs",
        Some(REVIEWER),
        Some(json!(f.corpus[0].packet)),
    )
    .await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = call(&f.app, Method::GET, "/reports/latest", Some(REVIEWER), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = call(&f.app, Method::GET, "/reports/latest", Some(ADMIN), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(
        &f.app,
        Method::GET,
        "/jobs/0123456789abcdef",
        Some(ADMIN),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(
        &f.app,
        Method::GET,
        "/jobs/0123456789abcdef/intermediates",
        Some(REVIEWER),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(
        &f.app,
        Method::POST,
        "/review/0123456789abcdef",
        Some(REVIEWER),
        Some(json!({"reviewer": "rita", "role": "reviewer", "actions": []})),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn submit_is_idempotent_and_reads_do_not_mutate() {
    let f = fixture();
    let ids = submit_all(&f).await;
    let (s, body) = call(
        &f.app,
        Method::POST,
        "/jobs",
        Some(ADMIN),
        Some(json!(f.corpus[0].packet)),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["job_id"], ids[0].as_str());

    let before = snapshot(&f.store);
    for id in &ids {
        for suffix in [
            "",
            "/sections",
            "/extraction",
            "/intermediates",
            "/determinations",
        ] {
            let (s, body) = call(
                &f.app,
                Method::GET,
                &format!("/jobs/{id}{suffix}"),
                Some(REVIEWER),
                None,
            )
            .await;
            assert_eq!(s, StatusCode::OK, "{suffix}: {body}");
        }
    }
    call(&f.app, Method::GET, "/review/queue", Some(REVIEWER), None).await;
    assert_eq!(before, snapshot(&f.store));

    let (_, job) = call(
        &f.app,
        Method::GET,
        &format!("/jobs/{}", ids[0]),
        Some(ADMIN),
        None,
    )
    .await;
    assert_eq!(job["packet_id"], f.corpus[0].packet.packet_id.as_str());
    let (_, inter) = call(
        &f.app,
        Method::GET,
        &format!("/jobs/{}/intermediates", ids[0]),
        Some(ADMIN),
        None,
    )
    .await;
    for key in [
        "ocr",
        "classification",
        "sections",
        "raw_outputs",
        "extraction",
    ] {
        assert!(!inter[key].is_null(), "{key} missing");
    }
    assert_eq!(
        inter["ocr"].as_array().unwrap().len(),
        f.corpus[0].packet.pages.len()
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn review_flow() {
    let f = fixture();
    let ids = submit_all(&f).await;
    let flagged: Vec<&str> = f
        .corpus
        .iter()
        .zip(&ids)
        .filter(|(g, _)| !g.low_confidence.is_empty())
        .map(|(_, id)| id.as_str())
        .collect();
    assert!(
        !flagged.is_empty(),
        "corpus should contain low-confidence packets"
    );

    let (s, queue) = call(&f.app, Method::GET, "/review/queue", Some(REVIEWER), None).await;
    assert_eq!(s, StatusCode::OK);
    let mut listed: Vec<&str> = queue
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["job_id"].as_str().unwrap())
        .collect();
    listed.sort();
    let mut expected = flagged.clone();
    expected.sort();
    assert_eq!(listed, expected);

    let item = queue.as_array().unwrap()[0].clone();
    let id = item["job_id"].as_str().unwrap().to_string();
    let flags = item["flagged"].as_array().unwrap();
    assert!(!flags.is_empty());

    let incomplete = json!({"reviewer": "rita", "role": "reviewer", "actions": []});
    let (s, body) = call(
        &f.app,
        Method::POST,
        &format!("/review/{id}"),
        Some(REVIEWER),
        Some(incomplete),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(
        body["details"]["missing"].as_array().unwrap().len(),
        flags.len()
    );

    let actions: Vec<Value> = flags
        .iter()
        .map(|fl| json!({"section_id": fl["section_id"], "attribute": fl["attribute"], "action": "accept"}))
        .collect();
    let as_admin = json!({"reviewer": "rita", "role": "admin", "actions": actions});
    let (s, _) = call(
        &f.app,
        Method::POST,
        &format!("/review/{id}"),
        Some(REVIEWER),
        Some(as_admin),
    )
    .await;
    assert_eq!(s, StatusCode::FORBIDDEN);

    let decision = json!({"reviewer": "rita", "role": "reviewer", "actions": actions});
    let (s, body) = call(
        &f.app,
        Method::POST,
        &format!("/review/{id}"),
        Some(REVIEWER),
        Some(decision.clone()),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let pool = f.state.pool.clone();
    tokio::task::spawn_blocking(move || pool.wait_idle())
        .await
        .unwrap();

    let (_, queue) = call(&f.app, Method::GET, "/review/queue", Some(REVIEWER), None).await;
    assert!(queue
        .as_array()
        .unwrap()
        .iter()
        .all(|i| i["job_id"] != id.as_str()));
    let (_, job) = call(
        &f.app,
        Method::GET,
        &format!("/jobs/{id}"),
        Some(REVIEWER),
        None,
    )
    .await;
    assert_eq!(job["stage"], "complete");
    let (_, ex) = call(
        &f.app,
        Method::GET,
        &format!("/jobs/{id}/extraction"),
        Some(REVIEWER),
        None,
    )
    .await;
    let human = ex["results"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r["attributes"].as_array().unwrap().iter())
        .filter(|a| a["provenance"] == "human")
        .count();
    assert_eq!(human, flags.len());

    let (s, _) = call(
        &f.app,
        Method::POST,
        &format!("/review/{id}"),
        Some(REVIEWER),
        Some(decision),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn latest_report_is_served() {
    let f = fixture();
    let path = f.store.join("reports/latest.json");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, r#"{"rows":[]}"#).unwrap();
    let (s, body) = call(&f.app, Method::GET, "/reports/latest", Some(ADMIN), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, json!({"rows": []}));
}

#[test]
fn tokens_file_format() {
    let t =
        Tokens::parse(r#"{"abc": {"role": "reviewer", "name": "rita"}, "xyz": {"role": "admin"}}"#)
            .unwrap();
    assert_eq!(t.0["abc"].role, Role::Reviewer);
    assert_eq!(t.0["xyz"].name, "");
    assert!(Tokens::parse(r#"{"abc": {"role": "owner"}}"#).is_err());
    assert!(Tokens::parse(r#"{" ": {"role": "admin"}}"#).is_err());
}

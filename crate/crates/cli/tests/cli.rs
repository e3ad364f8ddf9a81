use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use idp_core::extraction::{mock_extract, ModelRequest};
use idp_core::model::load_class_config;
use idp_core::ClassSchema;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn idp(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_idp"));
    cmd.args(args).env("IDP_BASE_DELAY_SECS", "0.001");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn process(manifest: &Path, backend: &str, out: &Path, env: &[(&str, &str)]) -> Output {
    let config = data_dir().join("engine.json");
    idp(
        &[
            "process",
            "--manifest",
            s(manifest),
            "--config",
            s(&config),
            "--backend",
            backend,
            "--out",
            s(out),
        ],
        env,
    )
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("run_report.json")).unwrap()).unwrap()
}

#[test]
fn input_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = process(
        &tmp.path().join("nope.csv"),
        "mock",
        &tmp.path().join("a"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));

    let manifest = tmp.path().join("m.csv");
    let good = data_dir().join("corpus/packets/packet-000.json");
    std::fs::write(
        &manifest,
        format!(
            "document_path\n{}\n{}/missing.json\n",
            s(&good),
            s(tmp.path())
        ),
    )
    .unwrap();
    let o = process(&manifest, "mock", &tmp.path().join("b"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3"), "{err}");
    assert!(!tmp.path().join("b/run_report.json").exists());

    let o = process(
        &data_dir().join("corpus/manifest.csv"),
        "telepathy",
        &tmp.path().join("c"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));

    let o = process(
        &data_dir().join("corpus/manifest.csv"),
        "remote",
        &tmp.path().join("d"),
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(2),
        "remote without an endpoint is a config error"
    );

    assert_eq!(idp(&[], &[]).status.code(), Some(2));
    assert_eq!(idp(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn review_pending_jobs_are_not_failures_and_evaluate_scores_them() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let manifest = data_dir().join("corpus-lowconf/manifest.csv");
    let o = process(&manifest, "mock", &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("Extraction Score"), "{table}");
    let r = report(&out);
    assert_eq!(r["jobs"], json!({"awaiting_review": 5, "complete": 5}));
    assert_eq!(r["rows"][0]["failed"], 0);

    let eval = tmp.path().join("eval");
    let o = idp(
        &[
            "evaluate",
            "--results",
            s(&out),
            "--baselines",
            s(&manifest),
            "--out",
            s(&eval),
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(eval.join("evaluation.json").is_file());
    assert!(eval.join("evaluation.txt").is_file());
}

#[test]
fn gen_corpus_rejects_impossible_specs() {
    let tmp = tempfile::tempdir().unwrap();
    let classes = data_dir().join("classes.json");
    let o = idp(
        &[
            "gen-corpus",
            "--classes",
            s(&classes),
            "--count",
            "2",
            "--seed",
            "1",
            "--out",
            s(tmp.path()),
            "--min-pages",
            "5",
            "--max-pages",
            "2",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

/// Serves the remote extraction protocol by answering with mock output.
fn start_model_server(status: StatusCode) -> SocketAddr {
    let classes: Arc<Vec<ClassSchema>> =
        Arc::new(load_class_config(data_dir().join("classes.json")).unwrap());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new().route(
                "/extract",
                post(move |headers: HeaderMap, Json(body): Json<Value>| {
                    let classes = classes.clone();
                    async move {
                        let authorized = headers
                            .get("authorization")
                            .is_some_and(|v| v == "Bearer sesame");
                        if !authorized {
                            return (StatusCode::UNAUTHORIZED, Json(json!({}))).into_response_pair();
                        }
                        if status != StatusCode::OK {
                            return (status, Json(json!({"error": "overloaded"}))).into_response_pair();
                        }
                        let req: ModelRequest = serde_json::from_value(body["request"].clone()).unwrap();
                        assert!(body["prompt"].as_str().is_some_and(|p| !p.is_empty()));
                        let schema = classes.iter().find(|c| c.class_name == req.class_name).unwrap();
                        let output = mock_extract(&req, schema);
                        (
                            StatusCode::OK,
                            Json(json!({"output": output, "usage": {"input_tokens": 100, "output_tokens": 50}})),
                        )
                            .into_response_pair()
                    }
                }),
            );
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

trait Pair {
    fn into_response_pair(self) -> (StatusCode, Json<Value>);
}

impl Pair for (StatusCode, Json<Value>) {
    fn into_response_pair(self) -> (StatusCode, Json<Value>) {
        self
    }
}

#[test]
fn remote_backend_speaks_the_wire_protocol() {
    let addr = start_model_server(StatusCode::OK);
    let endpoint = format!("http://{addr}/extract");
    let tmp = tempfile::tempdir().unwrap();
    let manifest = data_dir().join("corpus/manifest.csv");

    let out = tmp.path().join("ok");
    let env = [
        ("IDP_REMOTE_ENDPOINT", endpoint.as_str()),
        ("IDP_REMOTE_TOKEN", "sesame"),
    ];
    let o = process(&manifest, "remote", &out, &env);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&out);
    assert_eq!(r["rows"][0]["backend"], "remote");
    assert_eq!(r["rows"][0]["extraction_score"], 1.0);
    // 100 input and 50 output tokens per call at 0.003 / 0.015 per thousand
    let sections: usize = std::fs::read_dir(out.join("results/packets"))
        .unwrap()
        .map(|e| {
            let v: Value =
                serde_json::from_slice(&std::fs::read(e.unwrap().path()).unwrap()).unwrap();
            v["sections"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|s| s["class_name"] != "other")
                .count()
        })
        .sum();
    let cost = r["rows"][0]["total_cost"].as_f64().unwrap();
    assert!(
        (cost - sections as f64 * (0.1 * 0.003 + 0.05 * 0.015)).abs() < 1e-9,
        "{cost}"
    );

    let out = tmp.path().join("denied");
    let env = [
        ("IDP_REMOTE_ENDPOINT", endpoint.as_str()),
        ("IDP_REMOTE_TOKEN", "wrong"),
    ];
    let o = process(&manifest, "remote", &out, &env);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["rows"][0]["failed"], 10);
}

#[test]
fn remote_server_errors_dead_letter_the_jobs() {
    let addr = start_model_server(StatusCode::SERVICE_UNAVAILABLE);
    let endpoint = format!("http://{addr}/extract");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("busy");
    let env = [
        ("IDP_REMOTE_ENDPOINT", endpoint.as_str()),
        ("IDP_REMOTE_TOKEN", "sesame"),
    ];
    let o = process(
        &data_dir().join("corpus/manifest.csv"),
        "remote",
        &out,
        &env,
    );
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["jobs"], json!({"dead_lettered": 10}));
}

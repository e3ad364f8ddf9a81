//! Resource-oriented HTTP API over the job engine.
//!
//! | method | path | roles |
//! |---|---|---|
//! | `POST` | `/jobs` | admin |
//! | `GET` | `/jobs/{id}` | admin, reviewer |
//! | `GET` | `/jobs/{id}/sections` | admin, reviewer |
//! | `GET` | `/jobs/{id}/extraction` | admin, reviewer |
//! | `GET` | `/jobs/{id}/intermediates` | admin, reviewer |
//! | `GET` | `/jobs/{id}/determinations` | admin, reviewer |
//! | `GET` | `/review/queue` | admin, reviewer |
//! | `POST` | `/review/{id}` | admin, reviewer |
//! | `GET` | `/reports/latest` | admin |
//!
//! Every request carries `Authorization: Bearer <token>`; tokens map to a role
//! in the tokens file. Read endpoints never change state.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{FromRequestParts, Path as UrlPath, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use idp_core::assessment::{ReviewDecision, Role};
use idp_core::orchestrator::{Engine, WorkerPool};
use idp_core::{DocumentPacket, Error};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub role: Role,
    #[serde(default)]
    pub name: String,
}

/// Bearer token → identity. File form: `{"<token>": {"role": "admin", "name": "ops"}}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tokens(pub BTreeMap<String, TokenEntry>);

impl Tokens {
    pub fn parse(text: &str) -> idp_core::Result<Self> {
        let t: Tokens =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("tokens file: {e}")))?;
        if t.0.keys().any(|k| k.trim().is_empty()) {
            return Err(Error::Validation("tokens file: empty token".into()));
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> idp_core::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub pool: Arc<WorkerPool>,
    pub tokens: Arc<Tokens>,
}

impl AppState {
    /// Starts a worker pool on `engine` and queues every pending job.
    pub fn start(engine: Arc<Engine>, tokens: Tokens) -> idp_core::Result<Self> {
        let pool = WorkerPool::start(engine.clone());
        let resumed = pool.resume_pending()?;
        if !resumed.is_empty() {
            log::info!("resumed {} pending jobs", resumed.len());
        }
        Ok(AppState {
            engine,
            pool: Arc::new(pool),
            tokens: Arc::new(tokens),
        })
    }

    fn report_path(&self) -> PathBuf {
        self.engine
            .store()
            .root()
            .join("reports")
            .join("latest.json")
    }
}

/// The authenticated caller.
#[derive(Debug, Clone)]
pub struct Caller {
    pub role: Role,
    pub name: String,
}

impl Caller {
    fn require_admin(&self) -> Result<(), ApiError> {
        match self.role {
            Role::Admin => Ok(()),
            Role::Reviewer => Err(ApiError::new(
                StatusCode::FORBIDDEN,
                "forbidden",
                "this endpoint requires the admin role",
            )),
        }
    }
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        match token.and_then(|t| state.tokens.0.get(t)) {
            Some(e) => Ok(Caller {
                role: e.role,
                name: e.name.clone(),
            }),
            None => Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthenticated",
                "missing or unknown bearer token",
            )),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("{what} not found"),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::JobNotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::ReviewConflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::Unauthorized(_) => (StatusCode::FORBIDDEN, "forbidden"),
            Error::IncompleteDecision(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "incomplete_decision")
            }
            Error::Validation(_) | Error::KindMismatch(_) | Error::Parse(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let details = match &e {
            Error::IncompleteDecision(missing) => Some(json!({ "missing": missing })),
            _ => None,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError {
            status,
            code,
            message: e.to_string(),
            details,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(d) = self.details {
            body["details"] = d;
        }
        let mut resp = (self.status, Json(body)).into_response();
        if self.status == StatusCode::UNAUTHORIZED {
            resp.headers_mut().insert(
                header::WWW_AUTHENTICATE,
                "Bearer".parse().expect("static header"),
            );
        }
        resp
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> idp_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/sections", get(get_sections))
        .route("/jobs/{id}/extraction", get(get_extraction))
        .route("/jobs/{id}/intermediates", get(get_intermediates))
        .route("/jobs/{id}/determinations", get(get_determinations))
        .route("/review/queue", get(review_queue))
        .route("/review/{id}", post(submit_review))
        .route("/reports/latest", get(latest_report))
        .with_state(state)
}

/// Serves `router(state)` on `addr` until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn create_job(
    caller: Caller,
    State(st): State<AppState>,
    Json(packet): Json<DocumentPacket>,
) -> ApiResult<Response> {
    caller.require_admin()?;
    let (engine, pool) = (st.engine.clone(), st.pool.clone());
    let (created, rec) = blocking(move || {
        let existed = engine
            .store()
            .has_record(&engine.job_id_for(&packet.packet_id));
        let id = engine.submit_packet(&packet)?;
        pool.enqueue(&id)?;
        Ok((!existed, engine.record(&id)?))
    })
    .await?;
    let status = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((
        status,
        Json(json!({ "job_id": rec.job_id, "stage": rec.stage })),
    )
        .into_response())
}

async fn get_job(
    _: Caller,
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let engine = st.engine.clone();
    let (rec, dl) =
        blocking(move || Ok((engine.record(&id)?, engine.dead_letter_record(&id)?))).await?;
    let mut body = serde_json::to_value(&rec).expect("records serialize");
    if let Some(dl) = dl {
        body["dead_letter"] = serde_json::to_value(dl).expect("records serialize");
    }
    Ok(Json(body).into_response())
}

async fn get_sections(
    _: Caller,
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let engine = st.engine.clone();
    let job = id.clone();
    let sections = blocking(move || engine.sections(&job)).await?;
    Ok(Json(json!({ "job_id": id, "sections": sections })).into_response())
}

async fn get_extraction(
    _: Caller,
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let engine = st.engine.clone();
    let job = id.clone();
    let results = blocking(move || {
        engine.record(&job)?;
        engine.final_results(&job)
    })
    .await?;
    Ok(Json(json!({ "job_id": id, "results": results })).into_response())
}

async fn get_intermediates(
    _: Caller,
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let engine = st.engine.clone();
    let out = blocking(move || engine.intermediates(&id)).await?;
    Ok(Json(out).into_response())
}

async fn get_determinations(
    _: Caller,
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let engine = st.engine.clone();
    let job = id.clone();
    let d = blocking(move || engine.determinations(&job)).await?;
    Ok(Json(json!({ "job_id": id, "determinations": d })).into_response())
}

async fn review_queue(_: Caller, State(st): State<AppState>) -> ApiResult<Response> {
    let engine = st.engine.clone();
    let items = blocking(move || engine.review_queue()).await?;
    Ok(Json(items).into_response())
}

async fn submit_review(
    caller: Caller,
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(decision): Json<ReviewDecision>,
) -> ApiResult<Response> {
    if caller.role == Role::Reviewer && decision.role == Role::Admin {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            "a reviewer token cannot submit an admin decision",
        ));
    }
    let (engine, pool) = (st.engine.clone(), st.pool.clone());
    let rec = blocking(move || {
        let rec = engine.submit_review(&id, &decision)?;
        pool.enqueue(&id)?;
        Ok(rec)
    })
    .await?;
    Ok(Json(json!({ "job_id": rec.job_id, "stage": rec.stage })).into_response())
}

async fn latest_report(caller: Caller, State(st): State<AppState>) -> ApiResult<Response> {
    caller.require_admin()?;
    let path = st.report_path();
    let report = blocking(move || {
        st.engine
            .store()
            .read_optional_json::<serde_json::Value>(&path)
    })
    .await?;
    match report {
        Some(r) => Ok(Json(r).into_response()),
        None => Err(ApiError::not_found("report")),
    }
}

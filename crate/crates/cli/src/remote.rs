//! Extractor backend that forwards requests to an HTTP endpoint.
//!
//! The endpoint receives `POST` with `{"request": <ModelRequest>, "prompt": "<text>"}`
//! and answers `{"output": "<raw model text>", "usage": {"input_tokens": n, "output_tokens": n}}`
//! (`usage` optional). Transport errors, timeouts and non-2xx statuses are
//! reported as retryable backend errors.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use idp_core::extraction::{BackendResponse, ExtractorBackend, ModelRequest, Usage};
use idp_core::{ClassSchema, Error, Result};

pub const ENDPOINT_VAR: &str = "IDP_REMOTE_ENDPOINT";
pub const TOKEN_VAR: &str = "IDP_REMOTE_TOKEN";
pub const NAME_VAR: &str = "IDP_REMOTE_NAME";

#[derive(Serialize)]
struct Envelope<'a> {
    request: &'a ModelRequest,
    prompt: String,
}

#[derive(Deserialize)]
struct Reply {
    output: String,
    #[serde(default)]
    usage: Usage,
}

pub struct RemoteExtractor {
    name: String,
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteExtractor {
    pub fn new(
        name: impl Into<String>,
        endpoint: impl Into<String>,
        token: Option<String>,
        timeout: Duration,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Validation(format!("remote backend: {e}")))?;
        Ok(RemoteExtractor {
            name: name.into(),
            endpoint: endpoint.into(),
            token,
            client,
        })
    }

    /// Reads the endpoint, token and price-table name from `IDP_REMOTE_*` variables.
    pub fn from_env(timeout: Duration) -> Result<Self> {
        let endpoint = std::env::var(ENDPOINT_VAR).map_err(|_| {
            Error::Validation(format!("{ENDPOINT_VAR} must be set for the remote backend"))
        })?;
        let name = std::env::var(NAME_VAR).unwrap_or_else(|_| "remote".into());
        Self::new(name, endpoint, std::env::var(TOKEN_VAR).ok(), timeout)
    }
}

impl ExtractorBackend for RemoteExtractor {
    fn name(&self) -> &str {
        &self.name
    }

    fn extract(&self, request: &ModelRequest, _: &ClassSchema) -> Result<BackendResponse> {
        let mut req = self.client.post(&self.endpoint).json(&Envelope {
            request,
            prompt: request.prompt(),
        });
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req
            .send()
            .map_err(|e| Error::Backend(format!("{}: {e}", self.endpoint)))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            let body: String = body.chars().take(200).collect();
            return Err(Error::Backend(format!(
                "{}: HTTP {status}: {body}",
                self.endpoint
            )));
        }
        let reply: Reply = resp.json().map_err(|e| {
            Error::Backend(format!("{}: malformed reply envelope: {e}", self.endpoint))
        })?;
        Ok(BackendResponse {
            raw: reply.output,
            usage: reply.usage,
        })
    }
}

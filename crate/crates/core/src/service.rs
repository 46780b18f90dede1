//! Watermarking proxy in front of a text-generation backend.
//!
//! Endpoints:
//!
//! * `POST /v1/generate` `{"input": ...}` -> `{"text": ...}`: forwards the
//!   input upstream (or echoes it in stub mode) and watermarks the output;
//! * `POST /v1/verify` `{"lines": [...]}` -> verification report, guarded by
//!   a bearer token;
//! * `GET /healthz` -> status and lexicon fingerprint.
//!
//! The lexicon and key are loaded once and shared read-only. Key material
//! never appears in responses or logs.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::detector::{verify_with_stats, ReportEnvelope, VerifyParams};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::watermark::{WatermarkKey, Watermarker};

pub const DEFAULT_KEY_ENV: &str = "WM_KEY";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_BODY: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Upstream {
    /// Returns the input unchanged; useful for demos and tests.
    StubEcho,
    /// POSTs `{"input": ...}` and expects `{"text": ...}` back.
    Http { url: String },
}

/// Where a secret is read from. Secrets are never passed as flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecretSource {
    Env(String),
    File(PathBuf),
}

impl SecretSource {
    fn read(&self) -> Result<String> {
        match self {
            SecretSource::Env(var) => std::env::var(var)
                .map_err(|_| Error::InvalidKey(format!("environment variable {var} is not set"))),
            SecretSource::File(path) => std::fs::read_to_string(path)
                .map(|s| s.trim().to_owned())
                .map_err(|e| Error::io(path, e)),
        }
    }

    pub fn read_key(&self) -> Result<WatermarkKey> {
        match self {
            SecretSource::Env(var) => WatermarkKey::from_env(var),
            SecretSource::File(path) => WatermarkKey::from_file(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub upstream: Upstream,
    pub lexicon_path: PathBuf,
    pub key_source: SecretSource,
    pub upstream_timeout: Duration,
    pub max_body_bytes: usize,
    /// Bearer token for `/v1/verify`; the endpoint is disabled without one.
    pub verify_token: Option<SecretSource>,
    pub verify_params: VerifyParams,
}

impl ServiceConfig {
    pub fn new(lexicon_path: PathBuf) -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            upstream: Upstream::StubEcho,
            lexicon_path,
            key_source: SecretSource::Env(DEFAULT_KEY_ENV.into()),
            upstream_timeout: DEFAULT_TIMEOUT,
            max_body_bytes: DEFAULT_MAX_BODY,
            verify_token: None,
            verify_params: VerifyParams::default(),
        }
    }

    /// Parses the `key = value` config format. Relative paths are resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut config = ServiceConfig::new(PathBuf::new());
        let mut have_lexicon = false;
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(origin, line_no, "expected key = value"));
            };
            let (k, v) = (k.trim(), v.trim());
            let bad = |what: &str| Error::parse(origin, line_no, format!("invalid {what} '{v}'"));
            match k {
                "listen" => config.listen = v.parse().map_err(|_| bad("listen address"))?,
                "upstream" => {
                    config.upstream = if v == "stub_echo" {
                        Upstream::StubEcho
                    } else if v.starts_with("http://") || v.starts_with("https://") {
                        Upstream::Http { url: v.to_owned() }
                    } else {
                        return Err(bad("upstream"));
                    }
                }
                "lexicon" => {
                    config.lexicon_path = resolve(v);
                    have_lexicon = true;
                }
                "key_env" => config.key_source = SecretSource::Env(v.to_owned()),
                "key_file" => config.key_source = SecretSource::File(resolve(v)),
                "timeout_ms" => {
                    config.upstream_timeout = Duration::from_millis(v.parse().map_err(|_| bad("timeout"))?)
                }
                "max_body_bytes" => config.max_body_bytes = v.parse().map_err(|_| bad("body size"))?,
                "verify_token_env" => config.verify_token = Some(SecretSource::Env(v.to_owned())),
                "verify_token_file" => config.verify_token = Some(SecretSource::File(resolve(v))),
                "tau" => config.verify_params.tau = Some(v.parse().map_err(|_| bad("tau"))?),
                "alpha" => config.verify_params.alpha = v.parse().map_err(|_| bad("alpha"))?,
                other => return Err(Error::parse(origin, line_no, format!("unknown setting '{other}'"))),
            }
        }
        if !have_lexicon {
            return Err(Error::InvalidArgument(format!("{}: 'lexicon' is required", origin.display())));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }
}

#[derive(Debug, Default)]
struct Counters {
    generate: AtomicU64,
    substitutions: AtomicU64,
    verify: AtomicU64,
}

/// Immutable request-handling state shared by all connections.
pub struct ServiceState {
    watermarker: Watermarker,
    fingerprint: String,
    upstream: Upstream,
    client: reqwest::Client,
    verify_token: Option<String>,
    verify_params: VerifyParams,
    max_body_bytes: usize,
    counters: Counters,
}

impl ServiceState {
    pub fn new(
        watermarker: Watermarker,
        upstream: Upstream,
        upstream_timeout: Duration,
        max_body_bytes: usize,
        verify_token: Option<String>,
        verify_params: VerifyParams,
    ) -> Result<Self> {
        let client = reqwest::Client::builder()
            .timeout(upstream_timeout)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build HTTP client: {e}")))?;
        let fingerprint = watermarker.lexicon().fingerprint();
        Ok(ServiceState {
            watermarker,
            fingerprint,
            upstream,
            client,
            verify_token,
            verify_params,
            max_body_bytes,
            counters: Counters::default(),
        })
    }

    /// Loads the lexicon and resolves every secret named by `config`.
    pub fn from_config(config: &ServiceConfig) -> Result<Self> {
        let lexicon = Lexicon::load(&config.lexicon_path)?;
        let key = config.key_source.read_key()?;
        let token = config.verify_token.as_ref().map(SecretSource::read).transpose()?;
        if token.as_deref() == Some("") {
            return Err(Error::InvalidArgument("verify token is empty".into()));
        }
        Self::new(
            Watermarker::new(lexicon, key),
            config.upstream.clone(),
            config.upstream_timeout,
            config.max_body_bytes,
            token,
            config.verify_params,
        )
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

#[derive(Debug, Deserialize)]
struct GenerateRequest {
    input: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct UpstreamRequest<'a> {
    input: &'a str,
}

#[derive(Debug, Deserialize)]
struct UpstreamResponse {
    text: String,
}

#[derive(Debug, Deserialize)]
struct VerifyRequest {
    lines: Vec<String>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[allow(clippy::result_large_err)]
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> std::result::Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed request body: {e}")))
}

fn tokens_match(given: &str, expected: &str) -> bool {
    let (a, b) = (given.as_bytes(), expected.as_bytes());
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn fetch_upstream(state: &ServiceState, input: String) -> std::result::Result<String, Response> {
    let url = match &state.upstream {
        Upstream::StubEcho => return Ok(input),
        Upstream::Http { url } => url,
    };
    let sent = state
        .client
        .post(url)
        .json(&UpstreamRequest { input: &input })
        .send()
        .await;
    let resp = match sent {
        Ok(r) => r,
        Err(e) if e.is_timeout() => return Err(error(StatusCode::GATEWAY_TIMEOUT, "upstream timed out")),
        Err(e) => {
            tracing::warn!("upstream request failed: {e}");
            return Err(error(StatusCode::BAD_GATEWAY, "upstream request failed"));
        }
    };
    if !resp.status().is_success() {
        return Err(error(StatusCode::BAD_GATEWAY, format!("upstream returned {}", resp.status())));
    }
    match resp.json::<UpstreamResponse>().await {
        Ok(body) => Ok(body.text),
        Err(e) if e.is_timeout() => Err(error(StatusCode::GATEWAY_TIMEOUT, "upstream timed out")),
        Err(_) => Err(error(StatusCode::BAD_GATEWAY, "upstream response lacks a 'text' string")),
    }
}

async fn generate(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let request: GenerateRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let raw = match fetch_upstream(&state, request.input).await {
        Ok(text) => text,
        Err(resp) => return resp,
    };
    let marked = state.watermarker.apply(&raw);
    state.counters.generate.fetch_add(1, Ordering::Relaxed);
    state
        .counters
        .substitutions
        .fetch_add(marked.replacements.len() as u64, Ordering::Relaxed);
    Json(json!({ "text": marked.text })).into_response()
}

async fn verify(State(state): State<Arc<ServiceState>>, headers: HeaderMap, body: Bytes) -> Response {
    let Some(expected) = state.verify_token.as_deref() else {
        return error(StatusCode::FORBIDDEN, "verification endpoint is disabled");
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if !given.is_some_and(|g| tokens_match(g, expected)) {
        return error(StatusCode::UNAUTHORIZED, "missing or invalid bearer token");
    }
    let request: VerifyRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let worker_state = Arc::clone(&state);
    let outcome = tokio::task::spawn_blocking(move || {
        verify_with_stats(&worker_state.watermarker, &request.lines, &worker_state.verify_params)
    })
    .await;
    match outcome {
        Ok(Ok((report, _))) => {
            state.counters.verify.fetch_add(1, Ordering::Relaxed);
            Json(ReportEnvelope::new(&report, &state.fingerprint)).into_response()
        }
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(_) => error(StatusCode::INTERNAL_SERVER_ERROR, "verification failed"),
    }
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Response {
    let lexicon = state.watermarker.lexicon();
    Json(json!({
        "status": "ok",
        "version": crate::VERSION,
        "lexicon_fingerprint": state.fingerprint,
        "lexicon_kind": lexicon.kind(),
        "lexicon_groups": lexicon.len(),
        "generate_requests": state.counters.generate.load(Ordering::Relaxed),
        "substitutions": state.counters.substitutions.load(Ordering::Relaxed),
        "verify_requests": state.counters.verify.load(Ordering::Relaxed),
    }))
    .into_response()
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let limit = state.max_body_bytes;
    Router::new()
        .route("/v1/generate", post(generate))
        .route("/v1/verify", post(verify))
        .route("/healthz", get(healthz))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Runs the service until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let state = Arc::new(ServiceState::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| Error::io(config.listen.to_string(), e))?;
    tracing::info!(
        addr = %config.listen,
        fingerprint = %state.fingerprint,
        groups = state.watermarker.lexicon().len(),
        "serving"
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(config.listen.to_string(), e))
}

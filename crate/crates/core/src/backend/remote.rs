use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{BackendError, Completer, CompletionRequest, Embedder, EmbeddingVector, Result};

pub const API_KEY_ENV: &str = "PSYC_API_KEY";
pub const BASE_URL_ENV: &str = "PSYC_BASE_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL including the API prefix, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    /// Model used when a tag has no entry in `model_map`.
    pub chat_model: String,
    /// Model tag (`segment-0`, `summariser`, ...) to provider model name.
    pub model_map: BTreeMap<String, String>,
    pub embedding_model: String,
    pub timeout_ms: u64,
    pub concurrency: usize,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Never read from or written to config files.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "http://localhost:8000/v1".into(),
            chat_model: "llama-3.1-8b-instruct".into(),
            model_map: BTreeMap::new(),
            embedding_model: "text-embedding".into(),
            timeout_ms: 60_000,
            concurrency: 4,
            max_retries: 2,
            backoff_ms: 500,
            api_key: None,
        }
    }
}

impl RemoteConfig {
    /// Applies `PSYC_BASE_URL` and `PSYC_API_KEY` from the environment.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.trim().is_empty() {
                self.base_url = url;
            }
        }
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Limiter {
        Limiter {
            max: max.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter poisoned");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

/// Blocking client for OpenAI-compatible `/chat/completions` and `/embeddings`.
///
/// Transient failures (connection errors, timeouts, 5xx) are retried
/// `max_retries` times with exponential backoff; 4xx answers are not retried.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: Agent,
    limiter: Limiter,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> RemoteBackend {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::new(config.concurrency);
        RemoteBackend { config, agent, limiter }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body.to_string()).map_err(map_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::ProviderError { status, message: text });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse(format!("{e}: {text}")))
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value> {
        let url = self.url(path);
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body) {
                Err(e) if attempt < self.config.max_retries && is_transient(&e) => {
                    let wait = self.config.backoff_ms.saturating_mul(1 << attempt);
                    thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn is_transient(e: &BackendError) -> bool {
    match e {
        BackendError::Unreachable(_) | BackendError::Timeout => true,
        BackendError::ProviderError { status, .. } => *status >= 500,
        _ => false,
    }
}

fn map_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::Io(io) if matches!(io.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock) => BackendError::Timeout,
        other => BackendError::Unreachable(other.to_string()),
    }
}

impl Completer for RemoteBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        request.validate()?;
        let model = self
            .config
            .model_map
            .get(&request.model_tag)
            .unwrap_or(&self.config.chat_model);
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        });
        let resp = self.post("chat/completions", &body)?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::MalformedResponse(format!("no choices[0].message.content in {resp}")))
    }
}

impl Embedder for RemoteBackend {
    fn dimension(&self) -> Option<usize> {
        None
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(BackendError::EmptyText { index });
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({ "model": self.config.embedding_model, "input": texts });
        let resp = self.post("embeddings", &body)?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::MalformedResponse("missing `data` array".into()))?;
        if data.len() != texts.len() {
            return Err(BackendError::MalformedResponse(format!(
                "{} embeddings for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        let mut slots: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let values: Vec<f64> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| BackendError::MalformedResponse("missing `embedding`".into()))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| BackendError::MalformedResponse("non-numeric embedding".into())))
                .collect::<Result<_>>()?;
            let slot = slots
                .get_mut(index)
                .ok_or_else(|| BackendError::MalformedResponse(format!("embedding index {index} out of range")))?;
            *slot = Some(EmbeddingVector::new(values)?);
        }
        let vectors: Vec<EmbeddingVector> = slots
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| BackendError::MalformedResponse(format!("no embedding for input {i}"))))
            .collect::<Result<_>>()?;
        let expected = vectors[0].dim();
        if let Some(bad) = vectors.iter().find(|v| v.dim() != expected) {
            return Err(BackendError::DimensionMismatch {
                expected,
                got: bad.dim(),
            });
        }
        Ok(vectors)
    }
}

//! Completion and embedding providers.
//!
//! [`MockBackend`] is a pure function of its input and reproduces the planted
//! synthetic signals; [`RemoteBackend`] speaks the OpenAI-compatible
//! chat-completions and embeddings protocol.

mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

pub use mock::{mock_summary, MockBackend};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV, BASE_URL_ENV};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("provider returned {status}: {message}")]
    ProviderError { status: u16, message: String },
    #[error("request timed out")]
    Timeout,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("text {index} is empty")]
    EmptyText { index: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
}

pub type Result<T> = std::result::Result<T, BackendError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Routes the request to a specialised model, e.g. `segment-2`.
    pub model_tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, model_tag: impl Into<String>) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.into(),
            max_tokens: 512,
            temperature: 0.0,
            model_tag: model_tag.into(),
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} must be finite and non-negative",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<EmbeddingVector> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(BackendError::MalformedResponse(format!("embedding entry {i} is not finite")));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector is zero.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }
}

pub trait Completer: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

pub trait Embedder: Send + Sync {
    /// Fixed output dimension, when known before the first call.
    fn dimension(&self) -> Option<usize>;
    /// One vector per input, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;
}

pub const DEFAULT_HASH_DIMENSION: usize = 256;

/// L2-normalised hashed bag of words. A word's feature index is the FNV-1a hash
/// of its lowercased form modulo the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dimension: DEFAULT_HASH_DIMENSION,
        }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> HashEmbedder {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashEmbedder { dimension }
    }

    pub fn feature_index(&self, word: &str) -> usize {
        (text::fnv1a64(word.to_lowercase().as_bytes()) % self.dimension as u64) as usize
    }

    pub fn embed_one(&self, text: &str) -> Option<EmbeddingVector> {
        let mut v = vec![0.0; self.dimension];
        for w in text::words(text) {
            v[self.feature_index(w)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Some(EmbeddingVector(v))
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> Option<usize> {
        Some(self.dimension)
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| self.embed_one(t).ok_or(BackendError::EmptyText { index }))
            .collect()
    }
}

/// Which provider a run talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Mock,
    Remote(RemoteConfig),
}

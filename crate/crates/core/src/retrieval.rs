//! Word-window chunking and an exact cosine-similarity index over the three
//! knowledge sources: manual excerpts, training transcripts and the subject's
//! own transcript.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Embedder, EmbeddingVector};
use crate::corpus::WordSpan;
use crate::text;

pub const INDEX_FORMAT: &str = "psyc-vector-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("chunk size must be at least 1")]
    ZeroChunkSize,
    #[error("overlap {overlap} must be smaller than chunk size {size}")]
    OverlapNotLessThanSize { size: usize, overlap: usize },
    #[error("embedding dimension mismatch: index has {expected}, chunk has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chunk id `{0}` already indexed with different content")]
    DuplicateChunkId(String),
    #[error("no chunks match the query filter")]
    EmptyIndex,
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid index file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, RetrievalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KnowledgeSource {
    #[serde(rename = "manual")]
    ManualExcerpt,
    #[serde(rename = "train-interview")]
    TrainingInterview,
    #[serde(rename = "test-interview")]
    TestInterview,
}

impl KnowledgeSource {
    pub const ALL: [KnowledgeSource; 3] = [
        KnowledgeSource::ManualExcerpt,
        KnowledgeSource::TrainingInterview,
        KnowledgeSource::TestInterview,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            KnowledgeSource::ManualExcerpt => "manual",
            KnowledgeSource::TrainingInterview => "train-interview",
            KnowledgeSource::TestInterview => "test-interview",
        }
    }
}

impl fmt::Display for KnowledgeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for KnowledgeSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        KnowledgeSource::ALL
            .into_iter()
            .find(|k| k.slug() == s)
            .ok_or_else(|| format!("unknown knowledge source `{s}`"))
    }
}

/// A chunk before embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkDraft {
    pub chunk_id: String,
    pub source: KnowledgeSource,
    pub origin_id: String,
    pub word_span: WordSpan,
    /// The span's words joined by single spaces.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub chunk_id: String,
    pub source: KnowledgeSource,
    pub origin_id: String,
    pub word_span: WordSpan,
    pub text: String,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub chunk: KnowledgeChunk,
    pub score: f64,
}

pub fn chunk_id(source: KnowledgeSource, origin_id: &str, n: usize) -> String {
    format!("{}/{origin_id}#{n:04}", source.slug())
}

/// Splits `text` into windows of `size` words starting every `size - overlap`
/// words. The last window may be shorter; an empty text gives no chunks.
pub fn chunk_document(
    source: KnowledgeSource,
    doc_id: &str,
    text: &str,
    size: usize,
    overlap: usize,
) -> Result<Vec<ChunkDraft>> {
    if size == 0 {
        return Err(RetrievalError::ZeroChunkSize);
    }
    if overlap >= size {
        return Err(RetrievalError::OverlapNotLessThanSize { size, overlap });
    }
    let words: Vec<&str> = text::words(text).collect();
    let stride = size - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < words.len() {
        let end = (start + size).min(words.len());
        out.push(ChunkDraft {
            chunk_id: chunk_id(source, doc_id, out.len()),
            source,
            origin_id: doc_id.to_string(),
            word_span: WordSpan { start, end },
            text: words[start..end].join(" "),
        });
        if end == words.len() {
            break;
        }
        start += stride;
    }
    Ok(out)
}

/// Embeds drafts in batches of `batch` texts.
pub fn embed_chunks(drafts: Vec<ChunkDraft>, embedder: &dyn Embedder, batch: usize) -> Result<Vec<KnowledgeChunk>> {
    let mut out = Vec::with_capacity(drafts.len());
    for group in drafts.chunks(batch.max(1)) {
        let texts: Vec<&str> = group.iter().map(|d| d.text.as_str()).collect();
        let vectors = embedder.embed(&texts)?;
        if vectors.len() != group.len() {
            return Err(BackendError::MalformedResponse(format!(
                "{} embeddings for {} chunks",
                vectors.len(),
                group.len()
            ))
            .into());
        }
        out.extend(group.iter().zip(vectors).map(|(d, embedding)| KnowledgeChunk {
            chunk_id: d.chunk_id.clone(),
            source: d.source,
            origin_id: d.origin_id.clone(),
            word_span: d.word_span,
            text: d.text.clone(),
            embedding,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFilter {
    /// Allowed sources; `None` allows all.
    pub sources: Option<BTreeSet<KnowledgeSource>>,
    /// Only chunks from this document.
    pub origin: Option<String>,
    /// Never return chunks from this document.
    pub exclude_origin: Option<String>,
}

impl QueryFilter {
    pub fn sources(sources: impl IntoIterator<Item = KnowledgeSource>) -> QueryFilter {
        QueryFilter {
            sources: Some(sources.into_iter().collect()),
            ..QueryFilter::default()
        }
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    pub fn excluding_origin(mut self, origin: impl Into<String>) -> Self {
        self.exclude_origin = Some(origin.into());
        self
    }

    pub fn accepts(&self, chunk: &KnowledgeChunk) -> bool {
        self.sources.as_ref().is_none_or(|s| s.contains(&chunk.source))
            && self.origin.as_ref().is_none_or(|o| *o == chunk.origin_id)
            && self.exclude_origin.as_ref() != Some(&chunk.origin_id)
    }
}

/// Exact brute-force index. Build it, then share it read-only.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dimension: Option<usize>,
    chunks: Vec<KnowledgeChunk>,
    norms: Vec<f64>,
    by_id: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    dimension: Option<usize>,
    chunks: Vec<KnowledgeChunk>,
}

impl VectorIndex {
    pub fn new() -> VectorIndex {
        VectorIndex::default()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    /// Distinct `(source, origin_id)` pairs currently indexed.
    pub fn origins(&self) -> BTreeSet<(KnowledgeSource, String)> {
        self.chunks.iter().map(|c| (c.source, c.origin_id.clone())).collect()
    }

    /// Adds chunks; re-adding an identical chunk is a no-op. Returns the
    /// number of chunks actually inserted. Nothing is inserted on error.
    pub fn add(&mut self, chunks: Vec<KnowledgeChunk>) -> Result<usize> {
        let mut dim = self.dimension;
        let mut pending: HashMap<&str, &KnowledgeChunk> = HashMap::new();
        for c in &chunks {
            match dim {
                Some(d) if d != c.embedding.dim() => {
                    return Err(RetrievalError::DimensionMismatch {
                        expected: d,
                        got: c.embedding.dim(),
                    })
                }
                _ => dim = Some(c.embedding.dim()),
            }
            let existing = self.by_id.get(&c.chunk_id).map(|&i| &self.chunks[i]);
            if let Some(prev) = existing.or_else(|| pending.get(c.chunk_id.as_str()).copied()) {
                if prev != c {
                    return Err(RetrievalError::DuplicateChunkId(c.chunk_id.clone()));
                }
            }
            pending.insert(&c.chunk_id, c);
        }
        self.dimension = dim;
        let mut added = 0;
        for c in chunks {
            if self.by_id.contains_key(&c.chunk_id) {
                continue;
            }
            self.by_id.insert(c.chunk_id.clone(), self.chunks.len());
            self.norms.push(c.embedding.norm());
            self.chunks.push(c);
            added += 1;
        }
        Ok(added)
    }

    /// Removes every chunk of `origin_id` from `source`; returns how many.
    pub fn remove_source(&mut self, source: KnowledgeSource, origin_id: &str) -> usize {
        self.retain(|c| !(c.source == source && c.origin_id == origin_id))
    }

    /// Removes every chunk from `source`; returns how many.
    pub fn remove_all(&mut self, source: KnowledgeSource) -> usize {
        self.retain(|c| c.source != source)
    }

    fn retain(&mut self, keep: impl Fn(&KnowledgeChunk) -> bool) -> usize {
        let before = self.chunks.len();
        let (chunks, norms): (Vec<_>, Vec<_>) = std::mem::take(&mut self.chunks)
            .into_iter()
            .zip(std::mem::take(&mut self.norms))
            .filter(|(c, _)| keep(c))
            .unzip();
        self.chunks = chunks;
        self.norms = norms;
        self.by_id = self.chunks.iter().enumerate().map(|(i, c)| (c.chunk_id.clone(), i)).collect();
        before - self.chunks.len()
    }

    /// Exact top-k by cosine similarity, ties broken by ascending chunk id.
    pub fn query(&self, query: &EmbeddingVector, top_k: usize, filter: &QueryFilter) -> Result<Vec<RetrievalHit>> {
        if top_k == 0 {
            return Err(RetrievalError::InvalidTopK);
        }
        if let Some(d) = self.dimension {
            if d != query.dim() {
                return Err(RetrievalError::DimensionMismatch {
                    expected: d,
                    got: query.dim(),
                });
            }
        }
        let qn = query.norm();
        let mut scored: Vec<(f64, usize)> = self
            .chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| filter.accepts(c))
            .map(|(i, c)| {
                let denom = qn * self.norms[i];
                let dot: f64 = query.values().iter().zip(c.embedding.values()).map(|(a, b)| a * b).sum();
                (if denom == 0.0 { 0.0 } else { dot / denom }, i)
            })
            .collect();
        if scored.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.chunks[a.1].chunk_id.cmp(&self.chunks[b.1].chunk_id))
        };
        if scored.len() > top_k {
            scored.select_nth_unstable_by(top_k - 1, order);
            scored.truncate(top_k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(score, i)| RetrievalHit {
                chunk: self.chunks[i].clone(),
                score,
            })
            .collect())
    }

    pub fn query_text(
        &self,
        embedder: &dyn Embedder,
        text: &str,
        top_k: usize,
        filter: &QueryFilter,
    ) -> Result<Vec<RetrievalHit>> {
        let q = embedder.embed(&[text])?.into_iter().next().ok_or_else(|| {
            RetrievalError::Backend(BackendError::MalformedResponse("no embedding returned".into()))
        })?;
        self.query(&q, top_k, filter)
    }

    pub fn to_json(&self) -> String {
        let file = IndexFile {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            dimension: self.dimension,
            chunks: self.chunks.clone(),
        };
        serde_json::to_string(&file).expect("index serialises")
    }

    pub fn from_json(json: &str) -> Result<VectorIndex> {
        let file: IndexFile = serde_json::from_str(json).map_err(|e| RetrievalError::Format(e.to_string()))?;
        if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
            return Err(RetrievalError::Format(format!(
                "expected {INDEX_FORMAT} v{INDEX_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        let mut index = VectorIndex::new();
        index.dimension = file.dimension;
        index.add(file.chunks)?;
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<VectorIndex> {
        let json = fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        VectorIndex::from_json(&json)
    }
}

use serde_json::json;

use super::{BackendError, Completer, CompletionRequest, Embedder, EmbeddingVector, HashEmbedder, Result};
use crate::corpus::synth::SyntheticSpec;
use crate::corpus::{ClassLabel, Conflict};
use crate::retrieval::KnowledgeSource;
use crate::prompting::{self, SectionTag};
use crate::text;

/// Deterministic stand-in for both an LLM and an embedding model.
///
/// * Summarise prompts (`### TASK: summarise`): returns the first sentence of the
///   transcript section plus every later sentence containing a planted token.
/// * Classify prompts (`### TASK: classify` + `Conflict: <slug>`): counts the
///   conflict's tokens in the subject-summary section, or, if the prompt has no
///   summary, in the retrieved passages from the subject's own transcript. The
///   count is decoded through the synthetic spec and answered as a JSON
///   distribution with 0.9 on that class and 0.025 on each other class.
/// * Anything else gets a fixed non-JSON reply.
///
/// The model tag is accepted but does not change the answer.
#[derive(Debug, Clone)]
pub struct MockBackend {
    spec: SyntheticSpec,
    embedder: HashEmbedder,
}

pub const MOCK_TOP_MASS: f64 = 0.9;
pub const MOCK_REST_MASS: f64 = 0.025;

impl MockBackend {
    pub fn new(spec: SyntheticSpec) -> MockBackend {
        MockBackend {
            spec,
            embedder: HashEmbedder::default(),
        }
    }

    pub fn with_embedder(mut self, embedder: HashEmbedder) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    fn classify(&self, prompt: &str) -> Result<String> {
        let sections = prompting::split_rendered(prompt).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let conflict: Conflict = sections
            .iter()
            .filter(|(t, _)| *t == SectionTag::TaskInstruction)
            .flat_map(|(_, s)| s.lines())
            .find_map(|l| l.trim().strip_prefix(prompting::CONFLICT_LINE_PREFIX))
            .ok_or_else(|| BackendError::InvalidRequest("classify prompt names no conflict".into()))?
            .parse()
            .map_err(BackendError::InvalidRequest)?;
        let signal = self
            .spec
            .signal(conflict)
            .ok_or_else(|| BackendError::InvalidRequest(format!("no signal configured for {conflict}")))?;
        let summary = sections.iter().find(|(t, _)| *t == SectionTag::SubjectSummary);
        let evidence = match summary {
            Some((_, s)) => s.clone(),
            None => sections
                .iter()
                .filter(|(t, _)| *t == SectionTag::Retrieved)
                .flat_map(|(_, s)| prompting::retrieved_blocks(s))
                .filter(|b| b.source == KnowledgeSource::TestInterview)
                .map(|b| b.text)
                .collect::<Vec<_>>()
                .join("\n"),
        };
        let class = signal.decode_text(&evidence);
        Ok(distribution_json(class))
    }
}

fn distribution_json(class: ClassLabel) -> String {
    let mut map = serde_json::Map::new();
    for c in ClassLabel::ALL {
        let p = if c == class { MOCK_TOP_MASS } else { MOCK_REST_MASS };
        map.insert(c.name().to_string(), json!(p));
    }
    serde_json::Value::Object(map).to_string()
}

/// First sentence plus every later sentence containing one of `tokens`.
pub fn mock_summary(text: &str, tokens: &[&str]) -> String {
    let sentences = text::sentences(text);
    let Some((first, rest)) = sentences.split_first() else {
        return String::new();
    };
    let tokens: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut kept = vec![*first];
    kept.extend(
        rest.iter()
            .filter(|s| text::words(s).any(|w| tokens.contains(&text::bare_token(w)))),
    );
    kept.join(" ")
}

impl Completer for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        request.validate()?;
        let prompt = request.prompt.as_str();
        let has_line = |marker: &str| prompt.lines().any(|l| l.trim() == marker);
        if has_line(prompting::TASK_SUMMARISE) {
            let sections =
                prompting::split_rendered(prompt).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
            let transcript = sections
                .iter()
                .find(|(t, _)| *t == SectionTag::Context)
                .map(|(_, s)| s.as_str())
                .unwrap_or_default();
            Ok(mock_summary(transcript, &self.spec.all_tokens()))
        } else if has_line(prompting::TASK_CLASSIFY) {
            self.classify(prompt)
        } else {
            Ok("I can only summarise or classify interview material.".into())
        }
    }
}

impl Embedder for MockBackend {
    fn dimension(&self) -> Option<usize> {
        self.embedder.dimension()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        self.embedder.embed(texts)
    }
}

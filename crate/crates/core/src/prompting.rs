//! Prompt assembly and classifier-output parsing.
//!
//! A rendered prompt is a sequence of sections, each introduced by a reserved
//! delimiter line `### SECTION:<Tag>` where `<Tag>` is one of `StyleExample`,
//! `Context`, `FewShot`, `Retrieved`, `SubjectSummary`, `TaskInstruction`.
//! Section bodies follow verbatim and sections are separated by one newline,
//! so [`split_rendered`] inverts [`PromptBundle::render`] exactly. Caller
//! supplied text may not contain lines starting with `### SECTION:` or
//! `### TASK:`.
//!
//! The task section starts with `### TASK: summarise` or `### TASK: classify`;
//! classify prompts follow it with `Conflict: <slug>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ablation::AblationFlags;
use crate::assets::{PromptAssets, CATEGORIES_PLACEHOLDER, THEME_PLACEHOLDER};
use crate::corpus::{ClassLabel, Conflict, NUM_CLASSES};
use crate::ensemble::ClassDistribution;
use crate::retrieval::{KnowledgeSource, RetrievalHit};

pub const SECTION_PREFIX: &str = "### SECTION:";
pub const TASK_PREFIX: &str = "### TASK:";
pub const TASK_SUMMARISE: &str = "### TASK: summarise";
pub const TASK_CLASSIFY: &str = "### TASK: classify";
pub const CONFLICT_LINE_PREFIX: &str = "Conflict: ";

/// Mass on the named class when the model answers with a bare label.
pub const BARE_LABEL_MASS: f64 = 0.96;
pub const BARE_LABEL_REST: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("no context text for conflict {0}")]
    MissingContextText(Conflict),
    #[error("few-shot prompting needs one example per class, got {got} examples covering {distinct} classes")]
    FewShotWrongArity { got: usize, distinct: usize },
    #[error("{field} contains the reserved delimiter line `{line}`")]
    ReservedDelimiter { field: String, line: String },
    #[error("malformed rendered prompt: {0}")]
    MalformedRender(String),
    #[error("cannot read a class distribution from `{0}`")]
    Unparseable(String),
    #[error("negative probability for `{0}`")]
    NegativeProbability(String),
    #[error("all probabilities are zero")]
    AllZeroMass,
}

pub type Result<T> = std::result::Result<T, PromptError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionTag {
    StyleExample,
    Context,
    FewShot,
    Retrieved,
    SubjectSummary,
    TaskInstruction,
}

impl SectionTag {
    pub const ALL: [SectionTag; 6] = [
        SectionTag::StyleExample,
        SectionTag::Context,
        SectionTag::FewShot,
        SectionTag::Retrieved,
        SectionTag::SubjectSummary,
        SectionTag::TaskInstruction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionTag::StyleExample => "StyleExample",
            SectionTag::Context => "Context",
            SectionTag::FewShot => "FewShot",
            SectionTag::Retrieved => "Retrieved",
            SectionTag::SubjectSummary => "SubjectSummary",
            SectionTag::TaskInstruction => "TaskInstruction",
        }
    }
}

impl fmt::Display for SectionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionTag {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self> {
        SectionTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::MalformedRender(format!("unknown section tag `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptTask {
    Summarise,
    Classify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task: PromptTask,
    pub conflict: Option<Conflict>,
    pub sections: Vec<(SectionTag, String)>,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        self.sections
            .iter()
            .map(|(tag, text)| format!("{SECTION_PREFIX}{tag}\n{text}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn section(&self, tag: SectionTag) -> Option<&str> {
        self.sections.iter().find(|(t, _)| *t == tag).map(|(_, s)| s.as_str())
    }

    pub fn has_section(&self, tag: SectionTag) -> bool {
        self.section(tag).is_some()
    }
}

/// Inverse of [`PromptBundle::render`].
pub fn split_rendered(rendered: &str) -> Result<Vec<(SectionTag, String)>> {
    let mut out: Vec<(SectionTag, Vec<&str>)> = Vec::new();
    for line in rendered.split('\n') {
        if let Some(tag) = line.strip_prefix(SECTION_PREFIX) {
            out.push((tag.parse()?, Vec::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push(line);
        } else {
            return Err(PromptError::MalformedRender("text before the first section".into()));
        }
    }
    Ok(out.into_iter().map(|(t, lines)| (t, lines.join("\n"))).collect())
}

fn check_input(field: &str, text: &str) -> Result<()> {
    if let Some(line) = text
        .split('\n')
        .find(|l| l.starts_with(SECTION_PREFIX) || l.starts_with(TASK_PREFIX))
    {
        return Err(PromptError::ReservedDelimiter {
            field: field.to_string(),
            line: line.to_string(),
        });
    }
    Ok(())
}

fn require(field: &'static str, text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(PromptError::EmptyInput(field));
    }
    check_input(field, text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    /// Training interview the summary came from; kept for provenance audits.
    pub interview_id: String,
    pub summary: String,
    pub label: ClassLabel,
}

/// Summarisation prompt using the built-in instruction.
pub fn build_summary_prompt(text: &str, style_example: &str) -> Result<PromptBundle> {
    build_summary_prompt_with(text, style_example, &PromptAssets::builtin().summarise_instruction)
}

pub fn build_summary_prompt_with(text: &str, style_example: &str, instruction: &str) -> Result<PromptBundle> {
    require("transcript text", text)?;
    require("style example", style_example)?;
    check_input("summarise instruction", instruction)?;
    Ok(PromptBundle {
        task: PromptTask::Summarise,
        conflict: None,
        sections: vec![
            (SectionTag::StyleExample, style_example.to_string()),
            (SectionTag::Context, text.to_string()),
            (SectionTag::TaskInstruction, format!("{TASK_SUMMARISE}\n{instruction}")),
        ],
    })
}

/// The five category strings, quoted, in the order used by the instruction.
pub fn category_list() -> String {
    [
        ClassLabel::NotPresent,
        ClassLabel::NotAssessable,
        ClassLabel::LittleSignificance,
        ClassLabel::Significant,
        ClassLabel::VerySignificant,
    ]
    .iter()
    .map(|c| format!("\"{}\"", c.name()))
    .collect::<Vec<_>>()
    .join(", ")
}

fn source_enabled(source: KnowledgeSource, flags: &AblationFlags) -> bool {
    match source {
        KnowledgeSource::ManualExcerpt => flags.manual,
        KnowledgeSource::TrainingInterview => flags.train_interviews_in_vdb,
        KnowledgeSource::TestInterview => flags.test_interview_in_vdb,
    }
}

fn render_hits(hits: &[&RetrievalHit]) -> String {
    hits.iter()
        .map(|h| {
            let c = &h.chunk;
            format!(
                "[retrieved source={} origin={} chunk={} score={:.4}]\n{}",
                c.source,
                c.origin_id,
                c.chunk_id,
                h.score,
                c.text.split_whitespace().collect::<Vec<_>>().join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Classification prompt. Sections appear in the order Context, FewShot,
/// Retrieved, SubjectSummary, TaskInstruction; disabled ingredients are
/// left out, including retrieved hits from disabled sources.
pub fn build_classification_prompt(
    assets: &PromptAssets,
    conflict: Conflict,
    subject_summary: Option<&str>,
    few_shot: &[FewShotExample],
    retrieved: &[RetrievalHit],
    flags: &AblationFlags,
) -> Result<PromptBundle> {
    let context = assets.context(conflict).ok_or(PromptError::MissingContextText(conflict))?;
    check_input("context text", context)?;
    let mut sections = vec![(SectionTag::Context, context.to_string())];

    if flags.few_shot {
        let mut examples: Vec<&FewShotExample> = few_shot.iter().collect();
        examples.sort_by_key(|e| e.label);
        examples.dedup_by_key(|e| e.label);
        if few_shot.len() != NUM_CLASSES || examples.len() != NUM_CLASSES {
            return Err(PromptError::FewShotWrongArity {
                got: few_shot.len(),
                distinct: examples.len(),
            });
        }
        let mut blocks = Vec::new();
        for (i, e) in examples.iter().enumerate() {
            require("few-shot summary", &e.summary)?;
            blocks.push(format!("Example {} (category: \"{}\"):\n{}", i + 1, e.label.name(), e.summary.trim()));
        }
        sections.push((SectionTag::FewShot, blocks.join("\n\n")));
    }

    let hits: Vec<&RetrievalHit> = retrieved.iter().filter(|h| source_enabled(h.chunk.source, flags)).collect();
    if !hits.is_empty() {
        let rendered = render_hits(&hits);
        check_input("retrieved chunk", &rendered)?;
        sections.push((SectionTag::Retrieved, rendered));
    }

    if flags.subject_summary {
        let summary = subject_summary.ok_or(PromptError::EmptyInput("subject summary"))?;
        require("subject summary", summary)?;
        sections.push((SectionTag::SubjectSummary, summary.to_string()));
    }

    check_input("classify instruction", &assets.classify_instruction)?;
    let instruction = assets
        .classify_instruction
        .replace(THEME_PLACEHOLDER, conflict.theme())
        .replace(CATEGORIES_PLACEHOLDER, &category_list());
    sections.push((
        SectionTag::TaskInstruction,
        format!("{TASK_CLASSIFY}\n{CONFLICT_LINE_PREFIX}{}\n{instruction}", conflict.slug()),
    ));
    Ok(PromptBundle {
        task: PromptTask::Classify,
        conflict: Some(conflict),
        sections,
    })
}

/// One `[retrieved ...]` entry of a rendered Retrieved section.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedBlock {
    pub source: KnowledgeSource,
    pub origin_id: String,
    pub chunk_id: String,
    pub text: String,
}

pub fn retrieved_blocks(section: &str) -> Vec<RetrievedBlock> {
    let mut out = Vec::new();
    let mut lines = section.split('\n');
    while let Some(line) = lines.next() {
        let Some(header) = line.strip_prefix("[retrieved ").and_then(|h| h.strip_suffix(']')) else {
            continue;
        };
        let field = |key: &str| {
            header
                .split(' ')
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .map(str::to_string)
        };
        let Some(source) = field("source").and_then(|s| s.parse().ok()) else {
            continue;
        };
        out.push(RetrievedBlock {
            source,
            origin_id: field("origin").unwrap_or_default(),
            chunk_id: field("chunk").unwrap_or_default(),
            text: lines.next().unwrap_or_default().to_string(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseMode {
    JsonDistribution,
    BareLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedDistribution {
    pub distribution: ClassDistribution,
    pub mode: ParseMode,
}

/// Reads a classifier reply: either a JSON object mapping category strings to
/// non-negative numbers (renormalised; missing categories count as zero), or a
/// bare category string, smoothed to 0.96 on it and 0.01 elsewhere.
pub fn parse_class_output(raw: &str) -> Result<ParsedDistribution> {
    let trimmed = raw.trim();
    let unfenced = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(trimmed)
        .trim();
    if let (Some(open), Some(close)) = (unfenced.find('{'), unfenced.rfind('}')) {
        if open < close {
            if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&unfenced[open..=close]) {
                return parse_json_map(&map, raw).map(|distribution| ParsedDistribution {
                    distribution,
                    mode: ParseMode::JsonDistribution,
                });
            }
        }
    }
    let bare = unfenced.trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c.is_whitespace());
    if let Some(label) = ClassLabel::parse_name(bare) {
        let mut probs = [BARE_LABEL_REST; NUM_CLASSES];
        probs[label.index()] = BARE_LABEL_MASS;
        return Ok(ParsedDistribution {
            distribution: ClassDistribution::new(probs).expect("smoothed one-hot is valid"),
            mode: ParseMode::BareLabel,
        });
    }
    Err(PromptError::Unparseable(raw.chars().take(200).collect()))
}

fn parse_json_map(map: &serde_json::Map<String, Value>, raw: &str) -> Result<ClassDistribution> {
    let unparseable = || PromptError::Unparseable(raw.chars().take(200).collect());
    let mut mass = [0.0; NUM_CLASSES];
    for (key, value) in map {
        let class = ClassLabel::parse_name(key).ok_or_else(unparseable)?;
        let p = value.as_f64().filter(|p| p.is_finite()).ok_or_else(unparseable)?;
        if p < 0.0 {
            return Err(PromptError::NegativeProbability(key.clone()));
        }
        mass[class.index()] += p;
    }
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Err(PromptError::AllZeroMass);
    }
    if !total.is_finite() {
        return Err(unparseable());
    }
    Ok(ClassDistribution::new(mass.map(|m| m / total)).expect("normalised mass is a distribution"))
}

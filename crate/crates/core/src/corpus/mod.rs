//! Transcript data model, parsing, segmentation and synthetic corpora.

mod io;
mod parse;
mod segment;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_corpus, write_corpus_dir};
pub use parse::{parse_transcript, SpeakerTags, TranscriptFormat, TranscriptParser};
pub use segment::{segment, segment_words, Segment, WordSpan};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty input")]
    EmptyInput,
    #[error("no recognisable speaker turns")]
    NoRecognisableTurns,
    #[error("line {line}: text before the first speaker tag")]
    OrphanText { line: usize },
    #[error("turn {index} has no text")]
    EmptyTurn { index: usize },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid demographics: {0}")]
    InvalidDemographics(String),
    #[error("duplicate interview id `{0}`")]
    DuplicateId(String),
    #[error("k must be at least 1")]
    KZero,
    #[error("cannot split {words} words into {k} segments")]
    KTooLarge { words: usize, k: usize },
    #[error("conflict {conflict}: count ranges for `{first}` and `{second}` overlap")]
    OverlappingCountRanges {
        conflict: Conflict,
        first: ClassLabel,
        second: ClassLabel,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("interview {id}: could not place planted markers inside their home segment; raise target_words")]
    PlacementInfeasible { id: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// The four conflicts scored by the pipeline, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Conflict {
    #[serde(rename = "self-dependency")]
    SelfDependency,
    #[serde(rename = "dominance-submission")]
    DominanceSubmission,
    #[serde(rename = "self-sufficiency")]
    SelfSufficiency,
    #[serde(rename = "self-value")]
    SelfValue,
}

impl Conflict {
    pub const ALL: [Conflict; 4] = [
        Conflict::SelfDependency,
        Conflict::DominanceSubmission,
        Conflict::SelfSufficiency,
        Conflict::SelfValue,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Machine name used in files, prompts and CLI flags.
    pub fn slug(self) -> &'static str {
        match self {
            Conflict::SelfDependency => "self-dependency",
            Conflict::DominanceSubmission => "dominance-submission",
            Conflict::SelfSufficiency => "self-sufficiency",
            Conflict::SelfValue => "self-value",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Conflict::SelfDependency => "Self-dependency and dependency on others",
            Conflict::DominanceSubmission => "Dominance or submissiveness",
            Conflict::SelfSufficiency => "Self-sufficiency",
            Conflict::SelfValue => "Self-value and self-esteem",
        }
    }

    /// Short column header for report tables.
    pub fn short_name(self) -> &'static str {
        match self {
            Conflict::SelfDependency => "Self-dep.",
            Conflict::DominanceSubmission => "Dom./sub.",
            Conflict::SelfSufficiency => "Self-suff.",
            Conflict::SelfValue => "Self-val.",
        }
    }

    /// Theme phrase quoted in the classification instruction.
    pub fn theme(self) -> &'static str {
        match self {
            Conflict::SelfDependency => "autonomy-dependency",
            Conflict::DominanceSubmission => "dominance-submission",
            Conflict::SelfSufficiency => "care-self-sufficiency",
            Conflict::SelfValue => "self-value",
        }
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Conflict {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Conflict::ALL
            .into_iter()
            .find(|c| c.slug().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown conflict `{s}`"))
    }
}

/// The five ordinal significance classes. The discriminant is the class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "not assessable")]
    NotAssessable = 0,
    #[serde(rename = "not present")]
    NotPresent = 1,
    #[serde(rename = "of little significance")]
    LittleSignificance = 2,
    #[serde(rename = "significant")]
    Significant = 3,
    #[serde(rename = "very significant")]
    VerySignificant = 4,
}

pub const NUM_CLASSES: usize = 5;

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::NotAssessable,
        ClassLabel::NotPresent,
        ClassLabel::LittleSignificance,
        ClassLabel::Significant,
        ClassLabel::VerySignificant,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        ClassLabel::ALL.get(i).copied()
    }

    /// Category string as it appears in prompts and model output.
    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::NotAssessable => "not assessable",
            ClassLabel::NotPresent => "not present",
            ClassLabel::LittleSignificance => "of little significance",
            ClassLabel::Significant => "significant",
            ClassLabel::VerySignificant => "very significant",
        }
    }

    /// Case- and whitespace-insensitive lookup by category string.
    pub fn parse_name(s: &str) -> Option<ClassLabel> {
        let norm = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        ClassLabel::ALL.into_iter().find(|c| c.name() == norm)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Interviewer,
    Interviewee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    /// Parenthetical stage directions found in the text, e.g. `(Laughs.)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<String>,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Turn {
        let text = text.into();
        let annotations = extract_annotations(&text);
        Turn {
            speaker,
            text,
            annotations,
        }
    }
}

fn extract_annotations(text: &str) -> Option<String> {
    let mut found = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('(') {
        let Some(close) = rest[open..].find(')') else {
            break;
        };
        found.push(&rest[open..open + close + 1]);
        rest = &rest[open + close + 1..];
    }
    (!found.is_empty()).then(|| found.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn other(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub diagnosis: String,
    #[serde(rename = "age")]
    pub age_years: u32,
}

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 120;

impl Demographics {
    pub fn new(gender: Gender, diagnosis: impl Into<String>, age_years: u32) -> Result<Demographics> {
        let d = Demographics {
            gender,
            diagnosis: diagnosis.into(),
            age_years,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_AGE..=MAX_AGE).contains(&self.age_years) {
            return Err(CorpusError::InvalidDemographics(format!(
                "age {} outside [{MIN_AGE}, {MAX_AGE}]",
                self.age_years
            )));
        }
        if self.diagnosis.trim().is_empty() {
            return Err(CorpusError::InvalidDemographics("empty diagnosis".into()));
        }
        Ok(())
    }
}

/// One diagnostic interview, the unit of classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interview {
    pub id: String,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<Conflict, ClassLabel>,
}

impl Interview {
    /// All words of all turns, in order, interviewer and interviewee alike.
    pub fn words(&self) -> Vec<&str> {
        self.turns
            .iter()
            .flat_map(|t| crate::text::words(&t.text))
            .collect()
    }

    pub fn word_count(&self) -> usize {
        self.turns
            .iter()
            .map(|t| crate::text::words(&t.text).count())
            .sum()
    }

    /// The full transcript as one space-joined word sequence.
    pub fn full_text(&self) -> String {
        self.words().join(" ")
    }

    pub fn label(&self, conflict: Conflict) -> Option<ClassLabel> {
        self.labels.get(&conflict).copied()
    }

    /// Copy with ground-truth labels removed.
    pub fn without_labels(&self) -> Interview {
        Interview {
            labels: BTreeMap::new(),
            ..self.clone()
        }
    }
}

/// Checks corpus-level invariants: unique ids and non-empty turns.
pub fn validate_corpus(corpus: &[Interview]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for interview in corpus {
        if !seen.insert(interview.id.as_str()) {
            return Err(CorpusError::DuplicateId(interview.id.clone()));
        }
        if interview.turns.is_empty() {
            return Err(CorpusError::MalformedRecord(format!(
                "interview {} has no turns",
                interview.id
            )));
        }
    }
    Ok(())
}

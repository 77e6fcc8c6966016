use std::collections::BTreeMap;

use serde_json::Value;

use super::{ClassLabel, Conflict, CorpusError, Demographics, Gender, Interview, Result, Speaker, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscriptFormat {
    /// UTF-8 text, one speaker-tagged paragraph per turn.
    PlainDialogue,
    /// One JSON record: `{id, turns, demographics, labels}`.
    StructuredRecord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerTags {
    pub interviewer: String,
    pub interviewee: String,
}

impl Default for SpeakerTags {
    fn default() -> Self {
        SpeakerTags {
            interviewer: "Interviewer:".into(),
            interviewee: "Interviewee:".into(),
        }
    }
}

/// Parses a transcript with the default speaker tags. Plain dialogues get an id
/// derived from their content; use [`TranscriptParser::with_id`] to choose one.
pub fn parse_transcript(raw: &str, format: TranscriptFormat) -> Result<Interview> {
    TranscriptParser::new(format).parse(raw)
}

#[derive(Debug, Clone)]
pub struct TranscriptParser {
    format: TranscriptFormat,
    tags: SpeakerTags,
    id: Option<String>,
}

impl TranscriptParser {
    pub fn new(format: TranscriptFormat) -> Self {
        TranscriptParser {
            format,
            tags: SpeakerTags::default(),
            id: None,
        }
    }

    pub fn with_tags(mut self, tags: SpeakerTags) -> Self {
        self.tags = tags;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn parse(&self, raw: &str) -> Result<Interview> {
        if raw.trim().is_empty() {
            return Err(CorpusError::EmptyInput);
        }
        match self.format {
            TranscriptFormat::PlainDialogue => {
                let turns = parse_dialogue(raw, &self.tags)?;
                let id = self
                    .id
                    .clone()
                    .unwrap_or_else(|| format!("transcript-{:08x}", crate::text::fnv1a64(raw.as_bytes()) as u32));
                Ok(Interview {
                    id,
                    turns,
                    demographics: None,
                    labels: BTreeMap::new(),
                })
            }
            TranscriptFormat::StructuredRecord => {
                let value: Value = serde_json::from_str(raw)
                    .map_err(|e| CorpusError::MalformedRecord(format!("invalid JSON: {e}")))?;
                let mut interview = record_from_value(&value)?;
                if let Some(id) = &self.id {
                    interview.id = id.clone();
                }
                Ok(interview)
            }
        }
    }
}

fn parse_dialogue(raw: &str, tags: &SpeakerTags) -> Result<Vec<Turn>> {
    let mut turns: Vec<(Speaker, String)> = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tagged = [
            (tags.interviewer.as_str(), Speaker::Interviewer),
            (tags.interviewee.as_str(), Speaker::Interviewee),
        ]
        .into_iter()
        .find_map(|(tag, speaker)| trimmed.strip_prefix(tag).map(|rest| (speaker, rest.trim())));
        match tagged {
            Some((speaker, rest)) => turns.push((speaker, rest.to_string())),
            None => match turns.last_mut() {
                Some((_, text)) => {
                    if !text.is_empty() {
                        text.push('\n');
                    }
                    text.push_str(trimmed);
                }
                None => {
                    // Any tag at all further down? Then this is stray leading text.
                    let has_tags = raw.lines().any(|l| {
                        let l = l.trim();
                        l.starts_with(&tags.interviewer) || l.starts_with(&tags.interviewee)
                    });
                    return Err(if has_tags {
                        CorpusError::OrphanText { line: lineno + 1 }
                    } else {
                        CorpusError::NoRecognisableTurns
                    });
                }
            },
        }
    }
    if turns.is_empty() {
        return Err(CorpusError::NoRecognisableTurns);
    }
    turns
        .into_iter()
        .enumerate()
        .map(|(index, (speaker, text))| {
            if text.trim().is_empty() {
                Err(CorpusError::EmptyTurn { index })
            } else {
                Ok(Turn::new(speaker, text))
            }
        })
        .collect()
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| CorpusError::MalformedRecord(format!("missing required field `{name}`")))
}

fn str_field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a str> {
    field(obj, name)?
        .as_str()
        .ok_or_else(|| CorpusError::MalformedRecord(format!("field `{name}` must be a string")))
}

pub(super) fn record_from_value(value: &Value) -> Result<Interview> {
    let obj = value
        .as_object()
        .ok_or_else(|| CorpusError::MalformedRecord("record must be a JSON object".into()))?;
    let id = str_field(obj, "id")?.trim().to_string();
    if id.is_empty() {
        return Err(CorpusError::MalformedRecord("field `id` is empty".into()));
    }

    let raw_turns = field(obj, "turns")?
        .as_array()
        .ok_or_else(|| CorpusError::MalformedRecord("field `turns` must be an array".into()))?;
    if raw_turns.is_empty() {
        return Err(CorpusError::MalformedRecord("field `turns` is empty".into()));
    }
    let mut turns = Vec::with_capacity(raw_turns.len());
    for (index, t) in raw_turns.iter().enumerate() {
        let t = t
            .as_object()
            .ok_or_else(|| CorpusError::MalformedRecord(format!("turn {index} must be an object")))?;
        let speaker = match str_field(t, "speaker")?.trim().to_lowercase().as_str() {
            "interviewer" => Speaker::Interviewer,
            "interviewee" => Speaker::Interviewee,
            other => {
                return Err(CorpusError::MalformedRecord(format!(
                    "turn {index}: unknown speaker `{other}`"
                )))
            }
        };
        let text = str_field(t, "text")?;
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyTurn { index });
        }
        turns.push(Turn::new(speaker, text));
    }

    let demo = field(obj, "demographics")?
        .as_object()
        .ok_or_else(|| CorpusError::MalformedRecord("field `demographics` must be an object".into()))?;
    let gender = match str_field(demo, "gender")?.trim().to_lowercase().as_str() {
        "male" => Gender::Male,
        "female" => Gender::Female,
        other => return Err(CorpusError::InvalidDemographics(format!("unknown gender `{other}`"))),
    };
    let diagnosis = str_field(demo, "diagnosis")?;
    let age = field(demo, "age")?
        .as_u64()
        .ok_or_else(|| CorpusError::MalformedRecord("field `age` must be a non-negative integer".into()))?;
    let age = u32::try_from(age).map_err(|_| CorpusError::InvalidDemographics(format!("age {age} out of range")))?;
    let demographics = Demographics::new(gender, diagnosis, age)?;

    let mut labels = BTreeMap::new();
    if let Some(raw_labels) = obj.get("labels") {
        let raw_labels = raw_labels
            .as_object()
            .ok_or_else(|| CorpusError::MalformedRecord("field `labels` must be an object".into()))?;
        for (k, v) in raw_labels {
            let conflict: Conflict = k.parse().map_err(CorpusError::MalformedRecord)?;
            let class = v
                .as_str()
                .and_then(ClassLabel::parse_name)
                .ok_or_else(|| CorpusError::MalformedRecord(format!("labels.{k}: unknown class {v}")))?;
            labels.insert(conflict, class);
        }
    }

    Ok(Interview {
        id,
        turns,
        demographics: Some(demographics),
        labels,
    })
}

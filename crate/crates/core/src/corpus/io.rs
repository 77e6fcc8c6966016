use std::fs;
use std::path::Path;

use super::parse::{record_from_value, TranscriptFormat, TranscriptParser};
use super::{validate_corpus, CorpusError, Interview, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a corpus from a directory of `*.json` records (sorted by file name),
/// a file holding a single record, a newline-delimited file with one record
/// per line, or a speaker-tagged dialogue (any file not starting with `{`),
/// which becomes one unlabelled interview named after the file stem.
pub fn read_corpus(path: &Path) -> Result<Vec<Interview>> {
    let mut corpus = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        for file in files {
            let raw = fs::read_to_string(&file).map_err(io_err(&file))?;
            let value: serde_json::Value = serde_json::from_str(&raw)
                .map_err(|e| CorpusError::MalformedRecord(format!("{}: {e}", file.display())))?;
            corpus.push(record_from_value(&value)?);
        }
    } else {
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        if !raw.trim_start().starts_with('{') {
            let mut parser = TranscriptParser::new(TranscriptFormat::PlainDialogue);
            if let Some(stem) = path.file_stem() {
                parser = parser.with_id(stem.to_string_lossy());
            }
            return Ok(vec![parser.parse(&raw)?]);
        }
        // A file holding exactly one (possibly pretty-printed) record.
        if let Ok(value @ serde_json::Value::Object(_)) = serde_json::from_str::<serde_json::Value>(&raw) {
            corpus.push(record_from_value(&value)?);
            validate_corpus(&corpus)?;
            return Ok(corpus);
        }
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| CorpusError::MalformedRecord(format!("line {}: {e}", lineno + 1)))?;
            corpus.push(record_from_value(&value)?);
        }
    }
    validate_corpus(&corpus)?;
    Ok(corpus)
}

/// Writes one pretty-printed `<id>.json` record per interview.
pub fn write_corpus_dir(dir: &Path, corpus: &[Interview]) -> Result<()> {
    validate_corpus(corpus)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for interview in corpus {
        if interview.demographics.is_none() {
            return Err(CorpusError::MalformedRecord(format!(
                "interview {} has no demographics",
                interview.id
            )));
        }
        let file = dir.join(format!("{}.json", interview.id));
        let mut json = serde_json::to_string_pretty(interview).expect("interview serialises");
        json.push('\n');
        fs::write(&file, json).map_err(io_err(&file))?;
    }
    Ok(())
}

use serde::{Deserialize, Serialize};

use super::{CorpusError, Interview, Result};

/// Half-open `[start, end)` range over a word sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
}

impl WordSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..self.end).contains(&pos)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub interview_id: String,
    pub index: usize,
    pub word_span: WordSpan,
    pub text: String,
}

/// Sizes of `k` balanced parts of `n` words: the first `n mod k` get one extra.
pub(crate) fn segment_spans(n: usize, k: usize) -> Result<Vec<WordSpan>> {
    if k == 0 {
        return Err(CorpusError::KZero);
    }
    if n < k {
        return Err(CorpusError::KTooLarge { words: n, k });
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let span = WordSpan { start, end: start + len };
            start += len;
            span
        })
        .collect())
}

/// Splits an interview's word sequence (both speakers) into `k` contiguous,
/// non-overlapping segments whose lengths differ by at most one word.
/// Segment boundaries may fall inside a turn but never inside a word.
pub fn segment(interview: &Interview, k: usize) -> Result<Vec<Segment>> {
    segment_words(&interview.id, &interview.words(), k)
}

/// Same as [`segment`] for an arbitrary word sequence, e.g. a summary.
pub fn segment_words(id: &str, words: &[&str], k: usize) -> Result<Vec<Segment>> {
    Ok(segment_spans(words.len(), k)?
        .into_iter()
        .enumerate()
        .map(|(index, word_span)| Segment {
            interview_id: id.to_string(),
            index,
            word_span,
            text: words[word_span.start..word_span.end].join(" "),
        })
        .collect())
}

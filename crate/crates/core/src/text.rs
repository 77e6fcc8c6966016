//! Small text utilities shared by the mock backend, the synthetic generator and retrieval.

/// Words are maximal runs of non-whitespace; punctuation stays attached.
pub(crate) fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

/// Lowercased word with leading/trailing non-alphanumeric characters removed.
pub(crate) fn bare_token(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Number of words in `text` whose bare form equals `token` (case-insensitive).
pub(crate) fn count_token(text: &str, token: &str) -> usize {
    let token = token.to_lowercase();
    words(text).filter(|w| bare_token(w) == token).count()
}

/// Splits text into sentences. A sentence ends at `.`, `!` or `?` followed by
/// whitespace or end of input; a trailing fragment without terminator is kept.
pub(crate) fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, ch) in text.char_indices() {
        if matches!(ch, '.' | '!' | '?') {
            let next = i + ch.len_utf8();
            if next == bytes.len() || text[next..].starts_with(char::is_whitespace) {
                let s = text[start..next].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = next;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_split_keeps_fragments() {
        let s = sentences("One two. Three? Four! tail without stop");
        assert_eq!(s, vec!["One two.", "Three?", "Four!", "tail without stop"]);
    }

    #[test]
    fn sentence_split_ignores_inner_dots() {
        assert_eq!(sentences("Version 1.5 is out. Next."), vec!["Version 1.5 is out.", "Next."]);
    }

    #[test]
    fn token_count_strips_punctuation() {
        assert_eq!(count_token("Symbiosis, symbiosis. (symbiosis) symbiosisx", "symbiosis"), 3);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}

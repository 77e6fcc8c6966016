//! Seeded synthetic interviews with planted, countable label signals.
//!
//! Every conflict owns a marker token. An interview labelled with class `c` for
//! that conflict contains a number of marker tokens drawn from the class's count
//! range; `not assessable` interviews instead carry the conflict's "unclear"
//! token. All planted sentences for a conflict land inside one home segment
//! (by default one of the two middle quarters), everything else is neutral
//! filler, so a token count over the transcript recovers every label exactly.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::segment::segment_spans;
use super::{ClassLabel, Conflict, CorpusError, Demographics, Gender, Interview, Result, Speaker, Turn};
use crate::text;

/// Inclusive count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub const fn new(min: u32, max: u32) -> CountRange {
        CountRange { min, max }
    }

    pub fn contains(&self, n: u32) -> bool {
        (self.min..=self.max).contains(&n)
    }

    fn overlaps(&self, other: &CountRange) -> bool {
        self.min <= other.max && other.min <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictSignal {
    pub marker: String,
    /// Token planted for `not assessable` interviews, in place of the marker.
    pub unclear_marker: Option<String>,
    pub unclear_range: CountRange,
    /// Marker-count range per class. Must be pairwise disjoint.
    pub ranges: BTreeMap<ClassLabel, CountRange>,
    /// Relative class frequencies; normalised on use.
    pub priors: BTreeMap<ClassLabel, f64>,
    /// Segment (under `SyntheticSpec::k`) that receives every planted sentence;
    /// `None` spreads them over the whole interview.
    pub home_segment: Option<usize>,
}

impl ConflictSignal {
    fn new(marker: &str, unclear: &str, priors: [f64; 5], home: usize) -> ConflictSignal {
        ConflictSignal {
            marker: marker.into(),
            unclear_marker: Some(unclear.into()),
            unclear_range: CountRange::new(1, 2),
            ranges: default_ranges(),
            priors: ClassLabel::ALL.into_iter().zip(priors).collect(),
            home_segment: Some(home),
        }
    }

    /// Maps token counts back to a class: any unclear token wins; otherwise the
    /// class whose range holds `marker_count`, else the class with the largest
    /// lower bound below it, else `not assessable`.
    pub fn decode(&self, marker_count: u32, unclear_count: u32) -> ClassLabel {
        if self.unclear_marker.is_some() && unclear_count > 0 {
            return ClassLabel::NotAssessable;
        }
        if let Some((class, _)) = self.ranges.iter().find(|(_, r)| r.contains(marker_count)) {
            return *class;
        }
        self.ranges
            .iter()
            .filter(|(_, r)| r.min <= marker_count)
            .max_by_key(|(_, r)| r.min)
            .map(|(c, _)| *c)
            .unwrap_or(ClassLabel::NotAssessable)
    }

    /// Counts this conflict's tokens in `text` and decodes them.
    pub fn decode_text(&self, text: &str) -> ClassLabel {
        let markers = text::count_token(text, &self.marker) as u32;
        let unclear = self
            .unclear_marker
            .as_deref()
            .map_or(0, |u| text::count_token(text, u) as u32);
        self.decode(markers, unclear)
    }
}

fn default_ranges() -> BTreeMap<ClassLabel, CountRange> {
    BTreeMap::from([
        (ClassLabel::NotPresent, CountRange::new(0, 0)),
        (ClassLabel::LittleSignificance, CountRange::new(1, 2)),
        (ClassLabel::Significant, CountRange::new(3, 5)),
        (ClassLabel::VerySignificant, CountRange::new(6, 9)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisWeight {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Segment count the home segments refer to.
    pub k: usize,
    /// Filler words per interview, before planted sentences are added.
    pub target_words: usize,
    pub male_fraction: f64,
    pub diagnoses: Vec<DiagnosisWeight>,
    pub age_min: u32,
    pub age_max: u32,
    pub conflicts: BTreeMap<Conflict, ConflictSignal>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let diagnoses = [
            ("healthy control", 20.0),
            ("somatoform disorder", 22.0),
            ("borderline personality disorder", 19.0),
            ("depression", 18.0),
            ("anorexia", 14.0),
            ("bulimia", 14.0),
            ("anxiety disorder", 13.0),
        ]
        .into_iter()
        .map(|(name, weight)| DiagnosisWeight {
            name: name.into(),
            weight,
        })
        .collect();
        // Priors: not assessable, not present, little, significant, very significant.
        let conflicts = BTreeMap::from([
            (
                Conflict::SelfDependency,
                ConflictSignal::new("symbiosis", "vagueattachment", [0.10, 0.34, 0.22, 0.22, 0.12], 1),
            ),
            (
                Conflict::DominanceSubmission,
                ConflictSignal::new("subjugation", "vaguecontrol", [0.10, 0.38, 0.22, 0.18, 0.12], 2),
            ),
            (
                Conflict::SelfSufficiency,
                ConflictSignal::new("selfreliance", "vaguecaring", [0.10, 0.18, 0.24, 0.30, 0.18], 1),
            ),
            (
                Conflict::SelfValue,
                ConflictSignal::new("worthlessness", "vagueworth", [0.10, 0.32, 0.24, 0.22, 0.12], 2),
            ),
        ]);
        SyntheticSpec {
            k: 4,
            target_words: 1200,
            male_fraction: 21.0 / 141.0,
            diagnoses,
            age_min: 18,
            age_max: 57,
            conflicts,
        }
    }
}

impl SyntheticSpec {
    pub fn signal(&self, conflict: Conflict) -> Option<&ConflictSignal> {
        self.conflicts.get(&conflict)
    }

    /// Every marker and unclear token of every conflict.
    pub fn all_tokens(&self) -> Vec<&str> {
        self.conflicts
            .values()
            .flat_map(|s| std::iter::once(s.marker.as_str()).chain(s.unclear_marker.as_deref()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.k == 0 {
            return invalid("k must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.male_fraction) {
            return invalid(format!("male_fraction {} outside [0, 1]", self.male_fraction));
        }
        if self.diagnoses.is_empty() || self.diagnoses.iter().any(|d| d.weight < 0.0 || d.name.trim().is_empty()) {
            return invalid("diagnoses need non-empty names and non-negative weights".into());
        }
        if self.diagnoses.iter().map(|d| d.weight).sum::<f64>() <= 0.0 {
            return invalid("diagnosis weights sum to zero".into());
        }
        if self.age_min < super::MIN_AGE || self.age_max > super::MAX_AGE || self.age_min > self.age_max {
            return invalid(format!("age range [{}, {}] invalid", self.age_min, self.age_max));
        }
        let mut tokens = std::collections::HashSet::new();
        for (conflict, signal) in &self.conflicts {
            for tok in std::iter::once(&signal.marker).chain(signal.unclear_marker.as_ref()) {
                if tok.is_empty() || text::bare_token(tok) != tok.to_lowercase() || !tokens.insert(tok.to_lowercase()) {
                    return invalid(format!("{conflict}: token `{tok}` must be a unique alphanumeric word"));
                }
            }
            let ranges: Vec<_> = signal.ranges.iter().collect();
            for (i, (ca, ra)) in ranges.iter().enumerate() {
                if ra.min > ra.max {
                    return invalid(format!("{conflict}: range for `{ca}` has min > max"));
                }
                for (cb, rb) in &ranges[i + 1..] {
                    if ra.overlaps(rb) {
                        return Err(CorpusError::OverlappingCountRanges {
                            conflict: *conflict,
                            first: **ca,
                            second: **cb,
                        });
                    }
                }
            }
            if signal.unclear_range.min == 0 || signal.unclear_range.min > signal.unclear_range.max {
                return invalid(format!("{conflict}: unclear_range must be a non-empty range starting at 1 or more"));
            }
            let mut total = 0.0;
            for (class, &p) in &signal.priors {
                if p < 0.0 || !p.is_finite() {
                    return invalid(format!("{conflict}: prior for `{class}` must be non-negative"));
                }
                total += p;
                let plantable = match class {
                    ClassLabel::NotAssessable => signal.unclear_marker.is_some() || signal.ranges.contains_key(class),
                    _ => signal.ranges.contains_key(class),
                };
                if p > 0.0 && !plantable {
                    return invalid(format!("{conflict}: class `{class}` has a prior but no way to plant it"));
                }
            }
            if total <= 0.0 {
                return invalid(format!("{conflict}: priors sum to zero"));
            }
            if signal.home_segment.is_some_and(|h| h >= self.k) {
                return invalid(format!("{conflict}: home segment outside 0..{}", self.k));
            }
        }
        Ok(())
    }
}

/// Generates `n` labelled interviews. Deterministic in `(seed, n, spec)`.
pub fn generate_synthetic_corpus(seed: u64, n: usize, spec: &SyntheticSpec) -> Result<Vec<Interview>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut labels: Vec<BTreeMap<Conflict, ClassLabel>> = vec![BTreeMap::new(); n];
    for (conflict, signal) in &spec.conflicts {
        let mut assigned = quota_labels(&signal.priors, n);
        assigned.shuffle(&mut rng);
        for (slot, class) in labels.iter_mut().zip(assigned) {
            slot.insert(*conflict, class);
        }
    }

    let diag_total: f64 = spec.diagnoses.iter().map(|d| d.weight).sum();
    labels
        .into_iter()
        .enumerate()
        .map(|(j, labels)| {
            let id = format!("P{j:04}");
            let gender = if rng.random::<f64>() < spec.male_fraction {
                Gender::Male
            } else {
                Gender::Female
            };
            let mut u = rng.random::<f64>() * diag_total;
            let mut diagnosis = &spec.diagnoses[spec.diagnoses.len() - 1].name;
            for d in &spec.diagnoses {
                if u < d.weight {
                    diagnosis = &d.name;
                    break;
                }
                u -= d.weight;
            }
            let age = rng.random_range(spec.age_min..=spec.age_max);
            let demographics = Demographics::new(gender, diagnosis.clone(), age)?;
            let turns = build_turns(&mut rng, spec, &labels, &id)?;
            Ok(Interview {
                id,
                turns,
                demographics: Some(demographics),
                labels,
            })
        })
        .collect()
}

/// Class list of length `n` whose class counts follow the priors under
/// largest-remainder rounding (ties to the lower class index).
fn quota_labels(priors: &BTreeMap<ClassLabel, f64>, n: usize) -> Vec<ClassLabel> {
    let total: f64 = priors.values().sum();
    let exact: Vec<(ClassLabel, f64)> = priors.iter().map(|(c, p)| (*c, p / total * n as f64)).collect();
    let mut counts: Vec<(ClassLabel, usize, f64)> = exact
        .iter()
        .map(|(c, x)| (*c, x.floor() as usize, x - x.floor()))
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(n - assigned) {
        counts[i].1 += 1;
    }
    counts
        .into_iter()
        .flat_map(|(c, k, _)| std::iter::repeat_n(c, k))
        .collect()
}

// Max words between two interviewee sentence boundaries is one answer sentence
// plus one question; planted sentences are scheduled at least this far from
// their segment's end.
const PLACEMENT_SLACK: usize = 40;

fn build_turns(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    labels: &BTreeMap<Conflict, ClassLabel>,
    id: &str,
) -> Result<Vec<Turn>> {
    // Planted sentences grouped by home segment.
    let mut groups: BTreeMap<Option<usize>, Vec<String>> = BTreeMap::new();
    let mut planned: Vec<(Conflict, Option<usize>, u32)> = Vec::new();
    for (conflict, signal) in &spec.conflicts {
        let class = labels[conflict];
        let (token, count) = match (class, signal.ranges.get(&class)) {
            (_, Some(range)) => (signal.marker.as_str(), rng.random_range(range.min..=range.max)),
            (ClassLabel::NotAssessable, None) => (
                signal.unclear_marker.as_deref().expect("validated"),
                rng.random_range(signal.unclear_range.min..=signal.unclear_range.max),
            ),
            _ => unreachable!("validated: every class with a prior is plantable"),
        };
        planned.push((*conflict, signal.home_segment, count));
        let templates = if token == signal.marker { MARKER_TEMPLATES } else { UNCLEAR_TEMPLATES };
        for _ in 0..count {
            let template = templates.choose(rng).expect("non-empty");
            groups
                .entry(signal.home_segment)
                .or_default()
                .push(template.replace("{}", token));
        }
    }

    // Filler: question, then a two-to-four sentence answer, until the target is met.
    let mut units: Vec<(Speaker, &str, bool)> = Vec::new();
    let mut filler_words = 0;
    while filler_words < spec.target_words.max(spec.k) {
        let q = QUESTIONS.choose(rng).expect("non-empty");
        units.push((Speaker::Interviewer, q, true));
        filler_words += text::words(q).count();
        for i in 0..rng.random_range(2..=4) {
            let s = FILLER.choose(rng).expect("non-empty");
            units.push((Speaker::Interviewee, s, i == 0));
            filler_words += text::words(s).count();
        }
    }

    let planted_words: usize = groups.values().flatten().map(|s| text::words(s).count()).sum();
    let total = filler_words + planted_words;
    let spans = segment_spans(total, spec.k)?;

    let mut pending: Vec<(usize, String)> = Vec::new();
    for (home, mut sentences) in groups {
        sentences.shuffle(rng);
        let words: usize = sentences.iter().map(|s| text::words(s).count()).sum();
        let (lo, end) = match home {
            Some(q) => (spans[q].start + 1, spans[q].end),
            None => (1, total),
        };
        let hi = end.saturating_sub(words + PLACEMENT_SLACK);
        if hi < lo {
            return Err(CorpusError::PlacementInfeasible { id: id.into() });
        }
        let c = sentences.len();
        for (j, s) in sentences.into_iter().enumerate() {
            pending.push((lo + (hi - lo) * (2 * j + 1) / (2 * c), s));
        }
    }
    pending.sort_by_key(|(t, _)| *t);
    let mut pending = pending.into_iter().peekable();

    let mut turns: Vec<(Speaker, Vec<String>)> = Vec::new();
    let mut pos = 0;
    for (speaker, sentence, starts_turn) in units {
        if starts_turn {
            turns.push((speaker, Vec::new()));
        }
        let current = &mut turns.last_mut().expect("first unit starts a turn").1;
        if speaker == Speaker::Interviewee {
            while let Some((_, s)) = pending.next_if(|(t, _)| *t <= pos) {
                pos += text::words(&s).count();
                current.push(s);
            }
        }
        current.push(sentence.to_string());
        pos += text::words(sentence).count();
    }
    let leftovers: Vec<String> = pending.map(|(_, s)| s).collect();
    if !leftovers.is_empty() {
        turns.push((Speaker::Interviewee, leftovers));
    }

    let turns: Vec<Turn> = turns
        .into_iter()
        .map(|(speaker, sentences)| Turn::new(speaker, sentences.join(" ")))
        .collect();

    // Every planted token must sit in its home segment.
    let words: Vec<&str> = turns.iter().flat_map(|t| text::words(&t.text)).collect();
    let spans = segment_spans(words.len(), spec.k)?;
    for (conflict, home, count) in planned {
        let signal = &spec.conflicts[&conflict];
        let region = match home {
            Some(q) => &words[spans[q].start..spans[q].end],
            None => &words[..],
        };
        let found = [Some(signal.marker.as_str()), signal.unclear_marker.as_deref()]
            .into_iter()
            .flatten()
            .map(|tok| region.iter().filter(|w| text::bare_token(w) == tok.to_lowercase()).count())
            .sum::<usize>();
        if found != count as usize {
            return Err(CorpusError::PlacementInfeasible { id: id.into() });
        }
    }
    Ok(turns)
}

const QUESTIONS: &[&str] = &[
    "Could you tell me a little more about that?",
    "How did you experience that period yourself?",
    "What was it like growing up in your family?",
    "How would you describe your relationship with your parents?",
    "What happens in you when something like that occurs?",
    "How do you usually spend your weekends?",
    "Can you give me a concrete example of such a situation?",
    "How do things look at work for you at the moment?",
    "Who are the important people in your life right now?",
    "How did the others react to that?",
    "What do you think brought you here at this point?",
    "How do you handle disagreements with friends?",
    "What would you like to be different in a year?",
    "How did you feel when you moved out?",
    "Is there anything you would add to what we discussed?",
    "What was school like for you?",
];

const FILLER: &[&str] = &[
    "I usually get up around seven and make coffee first.",
    "We lived in a small town near the river back then.",
    "My job involves a lot of paperwork and phone calls.",
    "On Sundays I often go for a long walk in the park.",
    "The apartment is a bit small but it is quiet.",
    "I started cycling to work two years ago.",
    "My brother works as an electrician in another city.",
    "Last summer we spent two weeks at the coast.",
    "I like cooking, especially when friends come over.",
    "The commute takes about forty minutes each way.",
    "We have a cat that mostly sleeps on the sofa.",
    "I finished my apprenticeship when I was twenty.",
    "The weather has been rather grey these past weeks.",
    "I read a lot, mostly novels and some history.",
    "My grandmother had a garden with apple trees.",
    "At school I was good at maths but not at sports.",
    "I moved to this city for my first job.",
    "We usually visit my parents on public holidays.",
    "I have a few close friends from university.",
    "In the evenings I often watch a series or read.",
    "The team at work changed a lot last year.",
    "My father used to repair old radios in the basement.",
    "I sometimes play the guitar, though not very well.",
    "We renovated the kitchen last spring.",
    "My mother worked part-time at a bakery.",
    "I tried yoga for a while but stopped again.",
    "Our neighbours are friendly but we rarely talk.",
    "I went to a concert with a colleague recently.",
    "The doctor suggested I should sleep more regularly.",
    "My sister has two children, both still in school.",
    "I have been thinking about learning a new language.",
    "We used to go camping when I was a child.",
    "I bought a used car a few months ago.",
    "The holidays were calm this year.",
    "I help out at a sports club on some Saturdays.",
    "Most of my day is spent in front of a computer.",
    "I like the mornings best, before everyone is awake.",
    "We had a dog when I was a teenager.",
    "I do not really remember much from kindergarten.",
    "The last months were busy with exams.",
    "I visited an old friend in the mountains in autumn.",
    "My flat is close to the train station.",
    "I usually do the shopping on Friday afternoons.",
    "There is a small cafe near my office that I like.",
    "We celebrated my uncle's birthday in a restaurant.",
    "I tried to keep a diary but I kept forgetting it.",
    "My first job was in a warehouse during the holidays.",
    "I enjoy gardening on the balcony in summer.",
];

const MARKER_TEMPLATES: &[&str] = &[
    "Somehow it always comes back to {} when I think about it.",
    "My sister once said that {} runs through everything I do.",
    "I noticed the {} again last week at work.",
    "There is this feeling of {} that I cannot shake off.",
    "When I look back, {} was there in every relationship.",
    "It is hard to explain, but {} is part of it.",
];

const UNCLEAR_TEMPLATES: &[&str] = &[
    "I am not sure whether {} is the right word for it.",
    "Honestly I cannot say much about {} at all.",
    "Maybe {} plays a role, maybe not, I really do not know.",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn recount(spec: &SyntheticSpec, interview: &Interview, conflict: Conflict) -> ClassLabel {
        // Independent of `text::count_token`: a regex-free scan on ASCII word boundaries.
        let signal = &spec.conflicts[&conflict];
        let full = interview.full_text().to_lowercase();
        let count = |tok: &str| {
            full.split(|c: char| !c.is_ascii_alphanumeric())
                .filter(|w| *w == tok)
                .count() as u32
        };
        let unclear = signal.unclear_marker.as_deref().map_or(0, count);
        if unclear > 0 {
            return ClassLabel::NotAssessable;
        }
        let m = count(&signal.marker);
        *signal
            .ranges
            .iter()
            .find(|(_, r)| r.contains(m))
            .expect("count in some range")
            .0
    }

    #[test]
    fn empty_corpus() {
        assert!(generate_synthetic_corpus(1, 0, &SyntheticSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic_corpus(11, 12, &spec).unwrap();
        let b = generate_synthetic_corpus(11, 12, &spec).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_synthetic_corpus(12, 12, &spec).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_recoverable_by_token_count() {
        let spec = SyntheticSpec::default();
        for seed in 0..5 {
            let corpus = generate_synthetic_corpus(seed, 50, &spec).unwrap();
            for iv in &corpus {
                assert_eq!(iv.labels.len(), 4);
                for c in Conflict::ALL {
                    assert_eq!(recount(&spec, iv, c), iv.labels[&c], "{} {c}", iv.id);
                }
            }
        }
    }

    #[test]
    fn planted_tokens_stay_in_home_segment() {
        let spec = SyntheticSpec::default();
        let corpus = generate_synthetic_corpus(4, 30, &spec).unwrap();
        for iv in &corpus {
            let segs = crate::corpus::segment(iv, spec.k).unwrap();
            for (c, signal) in &spec.conflicts {
                let home = signal.home_segment.unwrap();
                for s in &segs {
                    let n = text::count_token(&s.text, &signal.marker)
                        + text::count_token(&s.text, signal.unclear_marker.as_deref().unwrap());
                    if s.index != home {
                        assert_eq!(n, 0, "{} {c} leaked into segment {}", iv.id, s.index);
                    }
                }
            }
        }
    }

    #[test]
    fn spread_placement_also_recoverable() {
        let mut spec = SyntheticSpec::default();
        for s in spec.conflicts.values_mut() {
            s.home_segment = None;
        }
        let corpus = generate_synthetic_corpus(9, 20, &spec).unwrap();
        for iv in &corpus {
            for c in Conflict::ALL {
                assert_eq!(recount(&spec, iv, c), iv.labels[&c]);
            }
        }
    }

    #[test]
    fn quota_follows_priors() {
        let priors = BTreeMap::from([
            (ClassLabel::NotPresent, 0.5),
            (ClassLabel::Significant, 0.3),
            (ClassLabel::VerySignificant, 0.2),
        ]);
        let labels = quota_labels(&priors, 10);
        assert_eq!(labels.iter().filter(|c| **c == ClassLabel::NotPresent).count(), 5);
        assert_eq!(labels.iter().filter(|c| **c == ClassLabel::Significant).count(), 3);
        assert_eq!(quota_labels(&priors, 7).len(), 7);
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let mut spec = SyntheticSpec::default();
        spec.conflicts
            .get_mut(&Conflict::SelfValue)
            .unwrap()
            .ranges
            .insert(ClassLabel::Significant, CountRange::new(2, 5));
        assert!(matches!(
            generate_synthetic_corpus(0, 3, &spec),
            Err(CorpusError::OverlappingCountRanges { conflict: Conflict::SelfValue, .. })
        ));
    }

    #[test]
    fn too_short_interviews_fail_loudly() {
        let spec = SyntheticSpec {
            target_words: 40,
            ..SyntheticSpec::default()
        };
        assert!(matches!(
            generate_synthetic_corpus(0, 10, &spec),
            Err(CorpusError::PlacementInfeasible { .. })
        ));
    }

    #[test]
    fn decode_rules() {
        let signal = &SyntheticSpec::default().conflicts[&Conflict::SelfDependency];
        assert_eq!(signal.decode(0, 0), ClassLabel::NotPresent);
        assert_eq!(signal.decode(4, 0), ClassLabel::Significant);
        assert_eq!(signal.decode(15, 0), ClassLabel::VerySignificant);
        assert_eq!(signal.decode(4, 1), ClassLabel::NotAssessable);
    }

    #[test]
    fn fillers_are_neutral() {
        let spec = SyntheticSpec::default();
        for s in FILLER.iter().chain(QUESTIONS).chain(MARKER_TEMPLATES).chain(UNCLEAR_TEMPLATES) {
            for tok in spec.all_tokens() {
                assert_eq!(text::count_token(s, tok), 0);
            }
            assert!(text::words(s).count() <= 15, "{s}");
        }
    }
}
